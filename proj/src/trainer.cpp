#include "davegan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "davegan/losses.hpp"

namespace davegan {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void config_fail(int line, const std::string& what) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + what);
}

long parse_long(const std::string& v, int line, const std::string& key) {
  std::size_t used = 0;
  long out = 0;
  try {
    out = std::stol(v, &used);
  } catch (const std::exception&) {
    config_fail(line, "cannot parse '" + v + "' for " + key);
  }
  if (used != v.size()) config_fail(line, "trailing characters in '" + v + "' for " + key);
  return out;
}

real_t parse_real(const std::string& v, int line, const std::string& key) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    config_fail(line, "cannot parse '" + v + "' for " + key);
  }
  if (used != v.size()) config_fail(line, "trailing characters in '" + v + "' for " + key);
  return static_cast<real_t>(out);
}

std::uint64_t parse_u64(const std::string& v, int line, const std::string& key) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    config_fail(line, "cannot parse '" + v + "' for " + key);
  }
  if (used != v.size()) config_fail(line, "trailing characters in '" + v + "' for " + key);
  return out;
}

void apply_pair(TrainConfig& c, const std::string& key, const std::string& val, int line) {
  if (key == "image_size")
    c.image_size = static_cast<int>(parse_long(val, line, key));
  else if (key == "z_dim")
    c.z_dim = static_cast<int>(parse_long(val, line, key));
  else if (key == "batch_size")
    c.batch_size = static_cast<int>(parse_long(val, line, key));
  else if (key == "epochs")
    c.epochs = static_cast<int>(parse_long(val, line, key));
  else if (key == "alpha_gen")
    c.alpha_gen = parse_real(val, line, key);
  else if (key == "alpha_disc")
    c.alpha_disc = parse_real(val, line, key);
  else if (key == "alpha_enc")
    c.alpha_enc = parse_real(val, line, key);
  else if (key == "beta")
    c.beta = parse_real(val, line, key);
  else if (key == "lambda_vae")
    c.lambda_vae = parse_real(val, line, key);
  else if (key == "lambda_noise")
    c.lambda_noise = parse_real(val, line, key);
  else if (key == "lambda_rec")
    c.lambda_rec = parse_real(val, line, key);
  else if (key == "aug.translation_std_frac")
    c.aug.translation_std_frac = parse_real(val, line, key);
  else if (key == "aug.latent_strength")
    c.aug.latent_strength = parse_real(val, line, key);
  else if (key == "aug.prior_jitter")
    c.aug.prior_jitter = parse_real(val, line, key);
  else if (key == "seed")
    c.seed = parse_u64(val, line, key);
  else if (key == "checkpoint_every")
    c.checkpoint_every = static_cast<int>(parse_long(val, line, key));
  else if (key == "max_steps")
    c.max_steps = parse_long(val, line, key);
  else
    config_fail(line, "unknown key '" + key + "'");
}

void append_real(std::string& out, real_t v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(v));
  out += buf;
}

void append_record(std::string& out, const LossRecord& r) {
  out += std::to_string(r.step);
  out += ',';
  out += std::to_string(r.epoch);
  for (real_t v : {r.l_disc, r.l_gen, r.l_enc, r.l_kld, r.l_rec}) {
    out += ',';
    append_real(out, v);
  }
  out += '\n';
}

constexpr const char* kCsvHeader = "step,epoch,l_disc,l_gen,l_enc,l_kld,l_rec\n";

}  // namespace

TrainConfig preset_config(const std::string& name) {
  TrainConfig c;  // the defaults are the ellipse column
  if (name == "ellipse") return c;
  if (name == "small-data") {
    c.image_size = 64;
    c.z_dim = 32;
    c.batch_size = 4;
    c.epochs = 20000;
    return c;
  }
  throw std::invalid_argument("preset_config: unknown preset '" + name +
                              "' (expected ellipse or small-data)");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw.substr(0, raw.find('#'));
    s = trim(s);
    if (s.empty()) continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) config_fail(line, "expected key=value, got '" + s + "'");
    apply_pair(base, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line);
  }
  return base;
}

TrainConfig parse_config_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_config_file: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string serialize_config(const TrainConfig& c) {
  std::string out;
  auto put_long = [&](const char* k, long v) { out += std::string(k) + "=" + std::to_string(v) + "\n"; };
  auto put_real = [&](const char* k, real_t v) {
    out += k;
    out += '=';
    append_real(out, v);
    out += '\n';
  };
  put_long("image_size", c.image_size);
  put_long("z_dim", c.z_dim);
  put_long("batch_size", c.batch_size);
  put_long("epochs", c.epochs);
  put_real("alpha_gen", c.alpha_gen);
  put_real("alpha_disc", c.alpha_disc);
  put_real("alpha_enc", c.alpha_enc);
  put_real("beta", c.beta);
  put_real("lambda_vae", c.lambda_vae);
  put_real("lambda_noise", c.lambda_noise);
  put_real("lambda_rec", c.lambda_rec);
  put_real("aug.translation_std_frac", c.aug.translation_std_frac);
  put_real("aug.latent_strength", c.aug.latent_strength);
  put_real("aug.prior_jitter", c.aug.prior_jitter);
  out += "seed=" + std::to_string(c.seed) + "\n";
  put_long("checkpoint_every", c.checkpoint_every);
  put_long("max_steps", c.max_steps);
  return out;
}

std::string format_csv(const LossLog& log) {
  std::string out = kCsvHeader;
  for (const LossRecord& r : log.records) append_record(out, r);
  return out;
}

void write_csv(const LossLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "'");
  std::string text = format_csv(log);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write_csv: write failed for '" + path + "'");
}

Trainer::Trainer(HybridModel& model, const TrainConfig& cfg)
    : model_(model),
      cfg_(cfg),
      opt_disc_(model.discriminator_params(), AdamConfig{cfg.alpha_disc, 0.5, 0.999, 1e-8}),
      opt_gen_(model.generator_params(), AdamConfig{cfg.alpha_gen, 0.5, 0.999, 1e-8}),
      opt_enc_(model.encoder_params(), AdamConfig{cfg.alpha_enc, 0.5, 0.999, 1e-8}),
      step_rng_(Rng::derive(cfg.seed, 101)),
      shuffle_rng_(Rng::derive(cfg.seed, 102)) {
  if (cfg.image_size != model.image_size() || cfg.z_dim != model.z_dim())
    throw std::invalid_argument("Trainer: config wants " + std::to_string(cfg.image_size) +
                                " px / z " + std::to_string(cfg.z_dim) + ", model is " +
                                std::to_string(model.image_size()) + " px / z " +
                                std::to_string(model.z_dim()));
}

void Trainer::zero_grads() {
  for (Variable* v : model_.encoder_params()) v->zero_grad();
  for (Variable* v : model_.generator_params()) v->zero_grad();
  for (Variable* v : model_.discriminator_params()) v->zero_grad();
}

Tensor Trainer::batch_tensor(const std::vector<const Grid*>& batch) const {
  const int B = static_cast<int>(batch.size());
  const int S = model_.image_size();
  std::vector<real_t> data(static_cast<std::size_t>(B) * S * S);
  for (int b = 0; b < B; ++b) {
    const Grid& g = *batch[static_cast<std::size_t>(b)];
    if (g.h != S || g.w != S)
      throw std::invalid_argument("train_step: sample " + std::to_string(b) + " is " +
                                  std::to_string(g.h) + "x" + std::to_string(g.w) + ", model wants " +
                                  std::to_string(S));
    for (std::size_t k = 0; k < g.v.size(); ++k)
      data[static_cast<std::size_t>(b) * g.v.size() + k] = static_cast<real_t>(g.v[k]);
  }
  return Tensor(Shape{B, 1, S, S}, std::move(data));
}

LossRecord Trainer::train_step(const std::vector<const Grid*>& batch, int epoch) {
  const int B = static_cast<int>(batch.size());
  if (B < 2) throw std::invalid_argument("train_step: batch statistics need >= 2 samples");
  const int S = model_.image_size();
  const int z = model_.z_dim();

  // the whole step's randomness, drawn up front in a fixed order
  Tensor eps = sample_noise(step_rng_, B, z);
  Tensor z_noise = sample_noise(step_rng_, B, z);
  TranslationParams u_rec = sample_translation(step_rng_, B, S, cfg_.aug.translation_std_frac);
  TranslationParams u_d_real = sample_translation(step_rng_, B, S, cfg_.aug.translation_std_frac);
  TranslationParams u_d_vae = sample_translation(step_rng_, B, S, cfg_.aug.translation_std_frac);
  TranslationParams u_d_noise = sample_translation(step_rng_, B, S, cfg_.aug.translation_std_frac);
  LatentAugParams u_lat = sample_latent_aug(step_rng_, z);
  PriorSample prior = sample_prior(step_rng_, z, cfg_.aug.prior_jitter);

  Tensor x = batch_tensor(batch);

  LossRecord out;
  out.step = ++step_;
  out.epoch = epoch;
  auto check_finite = [&](const char* which, real_t v) {
    if (!std::isfinite(static_cast<double>(v)))
      throw std::runtime_error("train_step: " + std::string(which) + " is " + std::to_string(v) +
                               " at step " + std::to_string(out.step) + ", epoch " +
                               std::to_string(out.epoch));
  };

  // critic first, on fixed snapshots of the other two players
  zero_grads();
  Tensor g_vae_val, g_noise_val;
  {
    LatentDist q = model_.encode(nullptr, x, true);
    Tensor z_vae = reparametrize(q, eps);
    g_vae_val = model_.generate(nullptr, z_vae, true);
    g_noise_val = model_.generate(nullptr, z_noise, true);
  }
  {
    Tape tape;
    Tensor d_real = model_.discriminate(&tape, translate_periodic(x, u_d_real), true);
    Tensor d_vae = model_.discriminate(&tape, translate_periodic(g_vae_val, u_d_vae), true);
    Tensor d_noise = model_.discriminate(&tape, translate_periodic(g_noise_val, u_d_noise), true);
    Tensor loss = discriminator_loss(d_real, d_vae, d_noise);
    out.l_disc = loss.item();
    check_finite("l_disc", out.l_disc);
    tape.backward(loss);
    opt_disc_.step();
  }

  // generator against the refreshed critic; the encoder's output is a
  // constant here
  zero_grads();
  {
    Tape tape;
    LatentDist q = model_.encode(nullptr, x, true);
    Tensor z_vae = reparametrize(q, eps);
    Tensor g_vae = model_.generate(&tape, z_vae, true);
    Tensor g_noise = model_.generate(&tape, z_noise, true);
    Tensor d_vae = model_.discriminate(&tape, translate_periodic(g_vae, u_d_vae), true);
    Tensor d_noise = model_.discriminate(&tape, translate_periodic(g_noise, u_d_noise), true);
    Tensor rec = reconstruction_loss(translate_periodic(g_vae, u_rec), translate_periodic(x, u_rec));
    GenWeights w{cfg_.lambda_vae, cfg_.lambda_noise, cfg_.lambda_rec};
    Tensor loss = generator_loss(d_vae, d_noise, rec, w);
    out.l_gen = loss.item();
    check_finite("l_gen", out.l_gen);
    tape.backward(loss);
    opt_gen_.step();
  }

  // encoder last: divergence of the shifted posterior from the shifted
  // randomized prior, plus the shared-shift reconstruction through the
  // (frozen) generator
  zero_grads();
  {
    Tape tape;
    LatentDist q = model_.encode(&tape, x, true);
    Tensor z_vae = reparametrize(q, eps);
    Tensor x_hat = model_.generate(&tape, z_vae, true);
    Tensor rec = reconstruction_loss(translate_periodic(x_hat, u_rec), translate_periodic(x, u_rec));
    real_t s = cfg_.aug.latent_strength;
    Tensor mu_aug = augment_mu(q.mu, u_lat, s);
    Tensor lv_aug = augment_log_var(q.log_var, u_lat, s);
    Tensor pm = reshape(augment_mu(Tensor(Shape{1, z}, prior.mu), u_lat, s), Shape{z});
    Tensor plv = reshape(augment_log_var(Tensor(Shape{1, z}, prior.log_var), u_lat, s), Shape{z});
    Tensor kld = kl_general(mu_aug, lv_aug, pm, plv);
    Tensor loss = encoder_loss(kld, rec, cfg_.beta);
    out.l_enc = loss.item();
    out.l_kld = kld.item();
    out.l_rec = rec.item();
    check_finite("l_enc", out.l_enc);
    check_finite("l_kld", out.l_kld);
    check_finite("l_rec", out.l_rec);
    tape.backward(loss);
    opt_enc_.step();
  }

  return out;
}

LossLog Trainer::train(const DataSet& data, const std::string& out_dir) {
  if (data.samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (data.size != model_.image_size())
    throw std::invalid_argument("train: dataset is " + std::to_string(data.size) +
                                " px, model wants " + std::to_string(model_.image_size()));
  const int n = static_cast<int>(data.samples.size());
  const int bs = cfg_.batch_size;
  if (bs < 2) throw std::invalid_argument("train: batch_size must be >= 2");
  const int ckpt_every =
      cfg_.checkpoint_every > 0 ? cfg_.checkpoint_every : std::max(1, cfg_.epochs / 10);

  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    csv.open(out_dir + "/loss.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("train: cannot open '" + out_dir + "/loss.csv'");
    csv << kCsvHeader;
  }

  LossLog log;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  bool stopped = false;
  for (int epoch = 1; epoch <= cfg_.epochs && !stopped; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(shuffle_rng_.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    for (int off = 0; off < n; off += bs) {
      int take = std::min(bs, n - off);
      if (take < 2) break;  // a lone trailing sample cannot feed batch statistics
      std::vector<const Grid*> batch(static_cast<std::size_t>(take));
      for (int k = 0; k < take; ++k)
        batch[static_cast<std::size_t>(k)] = &data.samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(off + k)])];
      LossRecord r = train_step(batch, epoch);
      log.records.push_back(r);
      if (csv.is_open()) {
        std::string line;
        append_record(line, r);
        csv << line;
      }
      if (cfg_.max_steps > 0 && step_ >= cfg_.max_steps) {
        stopped = true;
        break;
      }
    }
    if (!out_dir.empty() && !stopped && epoch % ckpt_every == 0) {
      model_.save(out_dir + "/checkpoint_epoch" + std::to_string(epoch) + ".dvgn");
      csv.flush();
    }
  }
  if (!out_dir.empty()) {
    model_.save(out_dir + "/model.dvgn");
    csv.flush();
  }
  return log;
}

Grid traversal_grid(HybridModel& model, const Grid& x_ref, real_t range_sigma, int steps) {
  if (steps < 1) throw std::invalid_argument("traversal_grid: steps must be >= 1");
  const int S = model.image_size();
  const int z = model.z_dim();
  if (x_ref.h != S || x_ref.w != S)
    throw std::invalid_argument("traversal_grid: reference is " + std::to_string(x_ref.h) + "x" +
                                std::to_string(x_ref.w) + ", model wants " + std::to_string(S));

  std::vector<real_t> xv(x_ref.v.begin(), x_ref.v.end());
  LatentDist q = model.encode(nullptr, Tensor(Shape{1, 1, S, S}, std::move(xv)), false);
  const std::vector<real_t>& mu = q.mu.data();

  // batch all z * steps sweep points; evaluation-mode statistics are
  // per-sample, so batching changes nothing
  std::vector<real_t> zs(static_cast<std::size_t>(z) * steps * z);
  for (int d = 0; d < z; ++d)
    for (int c = 0; c < steps; ++c) {
      real_t* row = zs.data() + (static_cast<std::size_t>(d) * steps + c) * z;
      for (int k = 0; k < z; ++k) row[k] = mu[static_cast<std::size_t>(k)];
      real_t t = steps == 1 ? real_t{0}
                            : static_cast<real_t>(2 * c - (steps - 1)) / static_cast<real_t>(steps - 1);
      row[d] = mu[static_cast<std::size_t>(d)] + range_sigma * t;
    }
  Tensor imgs = model.generate(nullptr, Tensor(Shape{z * steps, z}, std::move(zs)), false);

  const std::vector<real_t>& pv = imgs.data();
  Grid out(z * S, steps * S);
  for (int d = 0; d < z; ++d)
    for (int c = 0; c < steps; ++c) {
      const real_t* img = pv.data() + (static_cast<std::size_t>(d) * steps + c) * S * S;
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j)
          out.at(d * S + i, c * S + j) = static_cast<double>(img[static_cast<std::size_t>(i) * S + j]);
    }
  return out;
}

}  // namespace davegan

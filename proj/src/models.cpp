#include "davegan/models.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace davegan {

namespace {

LayerSpec conv(int f, int s, Padding p, bool bn, Activation a = Activation::LeakyRelu) {
  return LayerSpec{LayerKind::Conv2D, f, 4, s, p, bn, a};
}
LayerSpec tconv(int f, int s, Padding p, bool bn, Activation a = Activation::LeakyRelu) {
  return LayerSpec{LayerKind::TranspConv2D, f, 4, s, p, bn, a};
}

}  // namespace

HybridArchSpec hybrid_arch(int image_size, int z_dim) {
  if (z_dim < 1) throw std::invalid_argument("hybrid_arch: z_dim must be >= 1");
  HybridArchSpec spec;
  spec.image_size = image_size;
  spec.z_dim = z_dim;
  const auto S = Padding::Same;
  const auto V = Padding::Valid;
  const auto Sig = Activation::Sigmoid;
  if (image_size == 32) {
    spec.encoder.layers = {conv(16, 2, S, false), conv(32, 2, S, true), conv(64, 2, S, true),
                           conv(2 * z_dim, 1, V, true)};
    spec.generator.layers = {tconv(64, 1, V, true), tconv(32, 2, S, true), tconv(16, 2, S, true),
                             tconv(1, 2, S, true, Sig)};
    spec.discriminator.layers = {conv(8, 2, S, false), conv(16, 2, S, true), conv(32, 2, S, true),
                                 conv(1, 1, V, true, Sig)};
  } else if (image_size == 64) {
    spec.encoder.layers = {conv(16, 2, S, false), conv(16, 2, S, true), conv(32, 2, S, true),
                           conv(64, 2, S, true), conv(2 * z_dim, 1, V, true)};
    spec.generator.layers = {tconv(64, 1, V, true), tconv(32, 2, S, true), tconv(32, 2, S, true),
                             tconv(16, 2, S, true), tconv(1, 2, S, false, Sig)};
    spec.discriminator.layers = {conv(4, 2, S, false), conv(8, 2, S, true), conv(16, 2, S, true),
                                 conv(32, 2, S, true), conv(1, 1, V, true, Sig)};
  } else {
    throw std::invalid_argument("hybrid_arch: no family for image size " +
                                std::to_string(image_size) + " (have 32 and 64)");
  }
  return spec;
}

std::string arch_string(const HybridArchSpec& spec) {
  auto net = [](const ArchSpec& a) {
    std::string s;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const LayerSpec& l = a.layers[i];
      if (i) s += ',';
      s += (l.kind == LayerKind::Conv2D) ? 'C' : 'T';
      s += std::to_string(l.filters) + "k" + std::to_string(l.kernel) + "s" +
           std::to_string(l.stride);
      s += (l.padding == Padding::Same) ? 'S' : 'V';
      s += l.batch_norm ? "b1" : "b0";
      s += 'a';
      s += (l.activation == Activation::LeakyRelu) ? 'L'
           : (l.activation == Activation::Sigmoid) ? 'S'
                                                   : 'N';
    }
    return s;
  };
  return "size=" + std::to_string(spec.image_size) + ";z=" + std::to_string(spec.z_dim) +
         ";enc=" + net(spec.encoder) + ";gen=" + net(spec.generator) +
         ";disc=" + net(spec.discriminator);
}

std::uint64_t arch_hash(const HybridArchSpec& spec) {
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a
  for (char c : arch_string(spec)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

ConvNet::ConvNet(std::string name, const ArchSpec& arch, int in_channels, Rng& rng)
    : name_(std::move(name)) {
  if (arch.layers.empty()) throw std::invalid_argument("ConvNet " + name_ + ": no layers");
  int ch = in_channels;
  layers_.reserve(arch.layers.size());
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& ls = arch.layers[i];
    const std::string base = name_ + "." + std::to_string(i);
    Shape wshape = (ls.kind == LayerKind::Conv2D)
                       ? Shape{ls.filters, ch, ls.kernel, ls.kernel}
                       : Shape{ch, ls.filters, ls.kernel, ls.kernel};
    Variable w(base + ".w", wshape, gaussian_init(rng, wshape.numel()));
    Variable b = Variable::zeros(base + ".b", Shape{ls.filters});
    Layer layer{ls, std::move(w), std::move(b), std::nullopt, std::nullopt, std::nullopt};
    if (ls.batch_norm) {
      layer.gamma.emplace(base + ".gamma", Shape{ls.filters},
                          std::vector<real_t>(static_cast<std::size_t>(ls.filters), 1));
      layer.beta.emplace(Variable::zeros(base + ".beta", Shape{ls.filters}));
      layer.bn.emplace(ls.filters);
    }
    layers_.push_back(std::move(layer));
    ch = ls.filters;
  }
}

Tensor ConvNet::forward(Tape* tape, const Tensor& x, bool training) {
  auto as_tensor = [&](Variable& v) {
    return tape ? tape->watch(v) : Tensor(v.shape(), v.value());
  };
  Tensor cur = x;
  for (Layer& l : layers_) {
    Tensor w = as_tensor(l.w);
    Tensor b = as_tensor(l.b);
    cur = (l.spec.kind == LayerKind::Conv2D)
              ? conv2d(cur, w, b, l.spec.stride, l.spec.padding)
              : transp_conv2d(cur, w, b, l.spec.stride, l.spec.padding);
    if (l.bn) cur = batchnorm(cur, as_tensor(*l.gamma), as_tensor(*l.beta), *l.bn, training);
    if (l.spec.activation == Activation::LeakyRelu)
      cur = leaky_relu(cur);
    else if (l.spec.activation == Activation::Sigmoid)
      cur = sigmoid(cur);
  }
  return cur;
}

std::vector<Variable*> ConvNet::params() {
  std::vector<Variable*> out;
  for (Layer& l : layers_) {
    out.push_back(&l.w);
    out.push_back(&l.b);
    if (l.gamma) out.push_back(&*l.gamma);
    if (l.beta) out.push_back(&*l.beta);
  }
  return out;
}

std::vector<ConvNet::StateEntry> ConvNet::state_entries() {
  std::vector<StateEntry> out;
  for (Variable* p : params()) out.push_back({p->name(), p->shape(), &p->value()});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& l = layers_[i];
    if (!l.bn) continue;
    const std::string base = name_ + "." + std::to_string(i);
    out.push_back({base + ".rmean", Shape{l.spec.filters}, &l.bn->running_mean});
    out.push_back({base + ".rvar", Shape{l.spec.filters}, &l.bn->running_var});
  }
  return out;
}

Tensor reparametrize(const LatentDist& q, const Tensor& eps) {
  if (eps.shape() != q.mu.shape())
    throw std::invalid_argument("reparametrize: eps shape " + eps.shape().str() +
                                " does not match mu " + q.mu.shape().str());
  return q.mu + exp(q.log_var * real_t{0.5}) * eps;
}

Tensor sample_noise(Rng& rng, int batch, int z_dim) {
  if (batch < 1 || z_dim < 1)
    throw std::invalid_argument("sample_noise: batch and z_dim must be positive");
  std::vector<real_t> v(static_cast<std::size_t>(batch) * z_dim);
  for (auto& x : v) x = static_cast<real_t>(rng.normal());
  return Tensor(Shape{batch, z_dim}, std::move(v));
}

HybridModel::HybridModel(const HybridArchSpec& arch, std::uint64_t init_seed)
    : arch_(arch),
      encoder_([&] {
        Rng r = Rng::derive(init_seed, 0);
        return ConvNet("enc", arch.encoder, 1, r);
      }()),
      generator_([&] {
        Rng r = Rng::derive(init_seed, 1);
        return ConvNet("gen", arch.generator, arch.z_dim, r);
      }()),
      discriminator_([&] {
        Rng r = Rng::derive(init_seed, 2);
        return ConvNet("disc", arch.discriminator, 1, r);
      }()) {}

namespace {

void check_image(const Tensor& x, int size, const char* who) {
  if (x.shape().rank() != 4 || x.shape()[1] != 1 || x.shape()[2] != size ||
      x.shape()[3] != size)
    throw std::invalid_argument(std::string(who) + ": expected [B, 1, " + std::to_string(size) +
                                ", " + std::to_string(size) + "], got " + x.shape().str());
}

}  // namespace

LatentDist HybridModel::encode(Tape* tape, const Tensor& x, bool training) {
  check_image(x, arch_.image_size, "encode");
  Tensor h = encoder_.forward(tape, x, training);
  const int B = x.shape()[0];
  if (h.shape() != Shape{B, 2 * arch_.z_dim, 1, 1})
    throw std::logic_error("encode: head produced " + h.shape().str());
  Tensor flat = reshape(h, Shape{B, 2 * arch_.z_dim});
  return LatentDist{narrow(flat, 1, 0, arch_.z_dim), narrow(flat, 1, arch_.z_dim, arch_.z_dim)};
}

Tensor HybridModel::generate(Tape* tape, const Tensor& z, bool training) {
  Tensor zin = z;
  if (z.shape().rank() == 2) {
    if (z.shape()[1] != arch_.z_dim)
      throw std::invalid_argument("generate: expected [B, " + std::to_string(arch_.z_dim) +
                                  "], got " + z.shape().str());
    zin = reshape(z, Shape{z.shape()[0], arch_.z_dim, 1, 1});
  } else if (z.shape().rank() != 4 || z.shape()[1] != arch_.z_dim || z.shape()[2] != 1 ||
             z.shape()[3] != 1) {
    throw std::invalid_argument("generate: expected [B, " + std::to_string(arch_.z_dim) +
                                ", 1, 1], got " + z.shape().str());
  }
  Tensor out = generator_.forward(tape, zin, training);
  check_image(out, arch_.image_size, "generate output");
  return out;
}

Tensor HybridModel::discriminate(Tape* tape, const Tensor& x, bool training) {
  check_image(x, arch_.image_size, "discriminate");
  Tensor s = discriminator_.forward(tape, x, training);
  const int B = x.shape()[0];
  if (s.shape() != Shape{B, 1, 1, 1})
    throw std::logic_error("discriminate: head produced " + s.shape().str());
  return reshape(s, Shape{B});
}

std::vector<ConvNet::StateEntry> HybridModel::all_state() const {
  auto* self = const_cast<HybridModel*>(this);  // read-only traversal
  std::vector<ConvNet::StateEntry> out = self->encoder_.state_entries();
  auto gen = self->generator_.state_entries();
  auto disc = self->discriminator_.state_entries();
  out.insert(out.end(), gen.begin(), gen.end());
  out.insert(out.end(), disc.begin(), disc.end());
  return out;
}

namespace {

constexpr char kMagic[4] = {'D', 'V', 'G', 'N'};
constexpr std::uint32_t kVersion = 1;

void wr(std::ofstream& f, const void* p, std::size_t n) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void wr_pod(std::ofstream& f, T v) {
  wr(f, &v, sizeof v);
}

bool rd(std::ifstream& f, void* p, std::size_t n) {
  f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(f.gcount()) == n;
}

template <class T>
bool rd_pod(std::ifstream& f, T& v) {
  return rd(f, &v, sizeof v);
}

}  // namespace

void HybridModel::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save: cannot open " + path);
  wr(f, kMagic, 4);
  wr_pod(f, kVersion);
  wr_pod(f, static_cast<std::uint32_t>(arch_.z_dim));
  wr_pod(f, arch_hash(arch_));
  for (const auto& e : all_state()) {
    wr_pod(f, static_cast<std::uint32_t>(e.name.size()));
    wr(f, e.name.data(), e.name.size());
    wr_pod(f, static_cast<std::uint32_t>(e.shape.rank()));
    for (int d : e.shape.dims()) wr_pod(f, static_cast<std::uint32_t>(d));
    for (real_t v : *e.data) wr_pod(f, static_cast<float>(v));
  }
  if (!f) throw std::runtime_error("save: write failed for " + path);
}

HybridModel HybridModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load: cannot open " + path);
  char magic[4];
  if (!rd(f, magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load: " + path + " is not a model checkpoint (bad magic)");
  std::uint32_t version = 0, z_dim = 0;
  std::uint64_t hash = 0;
  if (!rd_pod(f, version) || !rd_pod(f, z_dim) || !rd_pod(f, hash))
    throw std::runtime_error("load: truncated header in " + path);
  if (version != kVersion)
    throw std::runtime_error("load: " + path + " has format version " + std::to_string(version) +
                             ", this build reads version " + std::to_string(kVersion));

  HybridArchSpec spec;
  bool found = false;
  for (int size : {32, 64}) {
    HybridArchSpec cand = hybrid_arch(size, static_cast<int>(z_dim));
    if (arch_hash(cand) == hash) {
      spec = cand;
      found = true;
      break;
    }
  }
  if (!found)
    throw std::runtime_error("load: " + path + " carries an unknown architecture (z_dim " +
                             std::to_string(z_dim) + ", hash " + std::to_string(hash) + ")");

  HybridModel model(spec, 0);
  auto entries = model.all_state();
  std::unordered_map<std::string, ConvNet::StateEntry*> by_name;
  for (auto& e : entries) by_name[e.name] = &e;
  std::size_t filled = 0;

  for (;;) {
    std::uint32_t name_len = 0;
    f.read(reinterpret_cast<char*>(&name_len), sizeof name_len);
    if (f.gcount() == 0 && f.eof()) break;
    if (static_cast<std::size_t>(f.gcount()) != sizeof name_len)
      throw std::runtime_error("load: truncated record header in " + path);
    if (name_len == 0 || name_len > 4096)
      throw std::runtime_error("load: corrupt record name length in " + path);
    std::string name(name_len, '\0');
    if (!rd(f, name.data(), name_len))
      throw std::runtime_error("load: truncated record name in " + path);
    std::uint32_t rank = 0;
    if (!rd_pod(f, rank) || rank > 8)
      throw std::runtime_error("load: corrupt rank for " + name + " in " + path);
    std::vector<int> dims(rank);
    for (auto& d : dims) {
      std::uint32_t v = 0;
      if (!rd_pod(f, v)) throw std::runtime_error("load: truncated extents for " + name);
      d = static_cast<int>(v);
    }
    Shape shape{std::vector<int>(dims)};
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("load: " + path + " holds unknown state " + name);
    if (it->second->shape != shape)
      throw std::runtime_error("load: " + name + " has shape " + shape.str() + ", expected " +
                               it->second->shape.str());
    std::vector<real_t>& dst = *it->second->data;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      float v = 0;
      if (!rd_pod(f, v)) throw std::runtime_error("load: truncated values for " + name);
      dst[i] = static_cast<real_t>(v);
    }
    ++filled;
  }
  if (filled != entries.size())
    throw std::runtime_error("load: " + path + " holds " + std::to_string(filled) +
                             " state entries, model needs " + std::to_string(entries.size()));
  return model;
}

}  // namespace davegan

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "davegan/data.hpp"
#include "davegan/descriptors.hpp"
#include "davegan/models.hpp"
#include "davegan/trainer.hpp"

namespace fs = std::filesystem;
using namespace davegan;

namespace {

void fail(const std::string& msg) { std::cerr << "davegan: " << msg << "\n"; }

std::string numbered(const char* stem, int k, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04d%s", stem, k, suffix);
  return buf;
}

std::string real17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Grid tensor_image(const Tensor& batch, int index, int size) {
  Grid g(size, size);
  const real_t* p = batch.data().data() + static_cast<std::size_t>(index) * size * size;
  for (std::size_t k = 0; k < g.size(); ++k) g.v[k] = static_cast<double>(p[k]);
  return g;
}

Tensor image_batch(const std::vector<Grid>& images, int size) {
  const int n = static_cast<int>(images.size());
  std::vector<real_t> data(static_cast<std::size_t>(n) * size * size);
  for (int b = 0; b < n; ++b)
    for (std::size_t k = 0; k < images[static_cast<std::size_t>(b)].size(); ++k)
      data[static_cast<std::size_t>(b) * size * size + k] =
          static_cast<real_t>(images[static_cast<std::size_t>(b)].v[k]);
  return Tensor(Shape{n, 1, size, size}, std::move(data));
}

// checkpoint problems are precondition failures: report and signal usage
bool load_model(const std::string& path, std::optional<HybridModel>& out) {
  if (!fs::exists(path)) {
    fail("checkpoint does not exist: '" + path + "'");
    return false;
  }
  try {
    out.emplace(HybridModel::load(path));
    return true;
  } catch (const std::exception& e) {
    fail(e.what());
    return false;
  }
}

int cmd_train(const std::string& data_path, const std::string& out_dir, const std::string& preset,
              const std::string& config_path, std::optional<std::uint64_t> seed) {
  if (!fs::exists(data_path)) {
    fail("data path does not exist: '" + data_path + "'");
    return 2;
  }
  TrainConfig cfg;
  try {
    cfg = preset_config(preset);
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) {
        fail("config does not exist: '" + config_path + "'");
        return 2;
      }
      cfg = parse_config_file(config_path, cfg);
    }
  } catch (const std::exception& e) {
    fail(e.what());
    return 2;
  }
  if (seed) cfg.seed = *seed;

  DataSet data;
  try {
    data = load_dataset(data_path);
  } catch (const std::exception& e) {
    fail(e.what());
    return 2;
  }

  try {
    fs::create_directories(out_dir);
    std::ofstream snap(out_dir + "/config.txt");
    if (!snap) throw std::runtime_error("cannot write '" + out_dir + "/config.txt'");
    snap << serialize_config(cfg);
    snap.close();

    HybridModel model(hybrid_arch(cfg.image_size, cfg.z_dim), cfg.seed);
    Trainer trainer(model, cfg);
    LossLog log = trainer.train(data, out_dir);
    std::cout << log.records.size() << " steps trained, outputs in '" << out_dir << "'\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    fail(e.what());
    return 2;
  } catch (const std::exception& e) {
    fail(e.what());
    return 1;
  }
}

int cmd_generate(const std::string& checkpoint, int num, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  if (num < 1) {
    fail("--num must be >= 1");
    return 2;
  }
  std::optional<HybridModel> model;
  if (!load_model(checkpoint, model)) return 2;
  try {
    fs::create_directories(out_dir);
    Rng rng(seed.value_or(1));
    const int size = model->image_size();
    for (int done = 0; done < num;) {
      int take = std::min(64, num - done);
      Tensor z = sample_noise(rng, take, model->z_dim());
      Tensor imgs = model->generate(nullptr, z, false);
      for (int k = 0; k < take; ++k) {
        Grid g = tensor_image(imgs, k, size);
        write_image(g, out_dir + "/" + numbered("gen_", done + k, ".pgm"));
        write_image(round_to_indicator(g), out_dir + "/" + numbered("gen_", done + k, ".round.pgm"));
      }
      done += take;
    }
    std::cout << num << " structures generated in '" << out_dir << "'\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    fail(e.what());
    return 2;
  } catch (const std::exception& e) {
    fail(e.what());
    return 1;
  }
}

int cmd_reconstruct(const std::string& checkpoint, const std::vector<std::string>& inputs) {
  std::optional<HybridModel> model;
  if (!load_model(checkpoint, model)) return 2;
  const int size = model->image_size();

  std::vector<Grid> images;
  for (const std::string& path : inputs) {
    if (!fs::exists(path)) {
      fail("input does not exist: '" + path + "'");
      return 2;
    }
    try {
      images.push_back(read_image(path));
    } catch (const std::exception& e) {
      fail(e.what());
      return 2;
    }
    const Grid& g = images.back();
    if (g.h != size || g.w != size) {
      fail("input '" + path + "' is " + std::to_string(g.h) + "x" + std::to_string(g.w) +
           ", model wants " + std::to_string(size));
      return 2;
    }
  }

  try {
    LatentDist q = model->encode(nullptr, image_batch(images, size), false);
    Tensor recon = model->generate(nullptr, q.mu, false);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      fs::path in(inputs[i]);
      std::string stem = in.stem().string();
      Grid g = tensor_image(recon, static_cast<int>(i), size);
      std::string raw = (in.parent_path() / (stem + ".recon.pgm")).string();
      write_image(g, raw);
      write_image(round_to_indicator(g), (in.parent_path() / (stem + ".recon.round.pgm")).string());
      std::cout << raw << "\n";
    }
    return 0;
  } catch (const std::invalid_argument& e) {
    fail(e.what());
    return 2;
  } catch (const std::exception& e) {
    fail(e.what());
    return 1;
  }
}

int cmd_traverse(const std::string& checkpoint, const std::string& input, double range, int steps,
                 const std::string& out_file) {
  std::optional<HybridModel> model;
  if (!load_model(checkpoint, model)) return 2;
  if (!fs::exists(input)) {
    fail("input does not exist: '" + input + "'");
    return 2;
  }
  Grid img;
  try {
    img = read_image(input);
  } catch (const std::exception& e) {
    fail(e.what());
    return 2;
  }
  try {
    Grid grid = traversal_grid(*model, img, static_cast<real_t>(range), steps);
    write_image(grid, out_file);
    std::cout << "traversal grid (" << grid.h << "x" << grid.w << ") written to '" << out_file
              << "'\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    fail(e.what());
    return 2;
  } catch (const std::exception& e) {
    fail(e.what());
    return 1;
  }
}

int cmd_metrics(const std::string& set_a, const std::string& set_b, const std::string& mode,
                const std::string& out_file) {
  DataSet a, b;
  try {
    a = load_dataset(set_a);
    b = load_dataset(set_b);
  } catch (const std::exception& e) {
    fail(e.what());
    return 2;
  }
  if (mode == "rec" && a.samples.size() != b.samples.size()) {
    fail("rec mode pairs samples, got " + std::to_string(a.samples.size()) + " vs " +
         std::to_string(b.samples.size()));
    return 2;
  }
  try {
    const char* label = mode == "rec" ? "e_rec" : "e_gen";
    double e = mode == "rec" ? error_rec(a.samples, b.samples) : error_gen(a.samples, b.samples);
    std::string csv = "kind,index,value\n";
    csv += std::string(label) + ",," + real17(e) + "\n";
    for (std::size_t i = 0; i < a.samples.size(); ++i)
      csv += "vf_a," + std::to_string(i) + "," +
             real17(volume_fraction(round_to_indicator(a.samples[i]))) + "\n";
    for (std::size_t i = 0; i < b.samples.size(); ++i)
      csv += "vf_b," + std::to_string(i) + "," +
             real17(volume_fraction(round_to_indicator(b.samples[i]))) + "\n";
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + out_file + "'");
    out << csv;
    std::cout << label << " = " << real17(e) << "\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    fail(e.what());
    return 2;
  } catch (const std::exception& e) {
    fail(e.what());
    return 1;
  }
}

int cmd_make_data(const std::string& kind, int size, int num, int cell, const std::string& input,
                  int tile, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  Grid source;
  if (kind == "tiles") {
    if (input.empty()) {
      fail("--kind tiles requires --input");
      return 2;
    }
    if (!fs::exists(input)) {
      fail("input does not exist: '" + input + "'");
      return 2;
    }
    try {
      source = read_image(input);
    } catch (const std::exception& e) {
      fail(e.what());
      return 2;
    }
  } else if (kind == "ellipse" && num < 1) {
    fail("--num must be >= 1");
    return 2;
  }

  try {
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    if (kind == "ellipse") {
      Rng rng(seed.value_or(1));
      DataSet set = sample_ellipse_dataset(num, size, rng);
      for (int k = 0; k < num; ++k) {
        names.push_back(numbered("ellipse_", k, ".pgm"));
        write_image(set.samples[static_cast<std::size_t>(k)], out_dir + "/" + names.back());
      }
    } else if (kind == "checkerboard") {
      names.push_back("checkerboard.pgm");
      write_image(make_checkerboard(size, cell), out_dir + "/" + names.back());
    } else {
      DataSet set = tile_micrograph(source, tile);
      for (std::size_t k = 0; k < set.samples.size(); ++k) {
        names.push_back(numbered("tile_", static_cast<int>(k), ".pgm"));
        write_image(set.samples[k], out_dir + "/" + names.back());
      }
    }
    write_manifest(out_dir + "/manifest.txt", names);
    std::cout << names.size() << " images and a manifest written to '" << out_dir << "'\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    fail(e.what());
    return 2;
  } catch (const std::exception& e) {
    fail(e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  // single-threaded build; the cap is accepted so wrappers can set it freely
  if (const char* threads = std::getenv("DAVEGAN_THREADS")) (void)threads;

  CLI::App app{"hybrid VAE/GAN for two-phase microstructure reconstruction"};
  app.require_subcommand(1);

  std::string data_path, out_dir, config_path, checkpoint, out_file, mode, kind, input;
  std::string preset = "ellipse";
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;
  int num = 1, steps = 13, size = 32, cell = 8, tile = 64;
  double range = 3.0;

  CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--data", data_path, "dataset directory or manifest")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--preset", preset, "hyperparameter preset")
      ->check(CLI::IsMember({"ellipse", "small-data"}))
      ->capture_default_str();
  train->add_option("--config", config_path, "key=value overrides applied onto the preset");
  train->add_option("--seed", seed, "override the config seed");

  CLI::App* generate = app.add_subcommand("generate", "decode structures from noise");
  generate->add_option("--checkpoint", checkpoint, "trained model file")->required();
  generate->add_option("--num", num, "number of structures")->capture_default_str();
  generate->add_option("--out", out_dir, "output directory")->required();
  generate->add_option("--seed", seed, "latent sampling seed");

  CLI::App* reconstruct = app.add_subcommand("reconstruct", "encode and decode given images");
  reconstruct->add_option("--checkpoint", checkpoint, "trained model file")->required();
  reconstruct->add_option("--input", inputs, "input graymaps")->required()->expected(-1);
  reconstruct->add_option("--seed", seed, "accepted for uniformity; reconstruction draws nothing");

  CLI::App* traverse = app.add_subcommand("traverse", "sweep each latent dimension around an encoding");
  traverse->add_option("--checkpoint", checkpoint, "trained model file")->required();
  traverse->add_option("--input", input, "reference graymap")->required();
  traverse->add_option("--range", range, "sweep half-width in prior standard deviations")
      ->capture_default_str();
  traverse->add_option("--steps", steps, "images per row")->capture_default_str();
  traverse->add_option("--out", out_file, "output graymap")->required();
  traverse->add_option("--seed", seed, "accepted for uniformity; the sweep draws nothing");

  out_file = "metrics.csv";
  CLI::App* metrics = app.add_subcommand("metrics", "descriptor error between two image sets");
  metrics->add_option("--set-a", data_path, "first manifest or directory")->required();
  metrics->add_option("--set-b", input, "second manifest or directory")->required();
  metrics->add_option("--mode", mode, "rec pairs by index, gen matches each b to its nearest a")
      ->check(CLI::IsMember({"rec", "gen"}))
      ->required();
  metrics->add_option("--out", out_file, "CSV report path")->capture_default_str();
  metrics->add_option("--seed", seed, "accepted for uniformity; metrics draw nothing");

  CLI::App* make_data = app.add_subcommand("make-data", "synthesize datasets");
  make_data->add_option("--kind", kind, "ellipse, checkerboard, or tiles")
      ->check(CLI::IsMember({"ellipse", "checkerboard", "tiles"}))
      ->required();
  make_data->add_option("--size", size, "image size in pixels")->capture_default_str();
  make_data->add_option("--num", num, "sample count (ellipse)")->capture_default_str();
  make_data->add_option("--cell", cell, "cell size (checkerboard)")->capture_default_str();
  make_data->add_option("--input", input, "source graymap (tiles)");
  make_data->add_option("--tile", tile, "tile size (tiles)")->capture_default_str();
  make_data->add_option("--out", out_dir, "output directory")->required();
  make_data->add_option("--seed", seed, "sampling seed (ellipse)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (train->parsed()) return cmd_train(data_path, out_dir, preset, config_path, seed);
  if (generate->parsed()) return cmd_generate(checkpoint, num, out_dir, seed);
  if (reconstruct->parsed()) return cmd_reconstruct(checkpoint, inputs);
  if (traverse->parsed()) return cmd_traverse(checkpoint, input, range, steps, out_file);
  if (metrics->parsed()) return cmd_metrics(data_path, input, mode, out_file);
  if (make_data->parsed()) return cmd_make_data(kind, size, num, cell, input, tile, out_dir, seed);
  return 2;
}

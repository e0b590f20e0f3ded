#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "davegan/augment.hpp"
#include "davegan/data.hpp"
#include "davegan/layers.hpp"
#include "davegan/models.hpp"
#include "davegan/tensor.hpp"

namespace davegan {

struct TrainConfig {
  int image_size = 32;
  int z_dim = 5;
  int batch_size = 32;
  int epochs = 200;
  real_t alpha_gen = 1e-4;
  real_t alpha_disc = 4e-5;
  real_t alpha_enc = 1e-4;
  real_t beta = 1.0;
  real_t lambda_vae = 1.0;
  real_t lambda_noise = 1.0;
  real_t lambda_rec = 1e-4;
  AugmentConfig aug;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 picks every 10% of the run
  long max_steps = 0;        // stop after this many optimization steps; 0 means no cap
};

// Named hyperparameter sets. "ellipse": 32 px, z 5, batch 32, 200 epochs
// (the defaults). "small-data": 64 px, z 32, batch 4, 20000 epochs.
TrainConfig preset_config(const std::string& name);

// Line-oriented "key=value" text; '#' starts a comment, blank lines are
// skipped. Unknown keys and unparsable values throw with the line number.
// Parsing overlays the pairs onto `base`, so a preset can be refined.
TrainConfig parse_config(const std::string& text, TrainConfig base = TrainConfig{});
TrainConfig parse_config_file(const std::string& path, TrainConfig base = TrainConfig{});

// Every field, one per line, in a fixed order; parse_config inverts it
// exactly (reals print with 17 significant digits).
std::string serialize_config(const TrainConfig& cfg);

struct LossRecord {
  long step = 0;  // global optimization step, 1-based
  int epoch = 0;  // epoch the step ran in, 1-based
  real_t l_disc = 0, l_gen = 0, l_enc = 0, l_kld = 0, l_rec = 0;
};

struct LossLog {
  std::vector<LossRecord> records;
};

// header "step,epoch,l_disc,l_gen,l_enc,l_kld,l_rec", one row per record,
// reals with 17 significant digits; byte-stable for a given log
std::string format_csv(const LossLog& log);
void write_csv(const LossLog& log, const std::string& path);

// Runs the three-player loop on one model: per batch a discriminator, a
// generator, and an encoder update, in that order, each consuming only its
// own Adam step. Owns the optimizer state, so step moments carry across
// calls.
class Trainer {
 public:
  // Derives its step and shuffle streams from cfg.seed; the model's own
  // initialization draws are independent of these.
  Trainer(HybridModel& model, const TrainConfig& cfg);

  // One optimization step over `batch` (size >= 2, for batch statistics).
  //
  // Draw order is fixed per step: reparametrization noise, generator prior
  // noise, the shared reconstruction shift, three per-route critic shifts,
  // the latent shift pair, the divergence prior. The critic trains on
  // shifted real, decoded and noise-generated images; the generator then
  // chases the refreshed critic through the same shifts and carries the
  // weighted reconstruction term under the shared shift; the encoder
  // minimizes the divergence of the shifted posterior from the shifted
  // randomized prior plus the same reconstruction term. Throws when any
  // loss leaves the finite range, naming the step.
  LossRecord train_step(const std::vector<const Grid*>& batch, int epoch = 0);

  // Full run: per epoch one shuffled pass over the dataset in batches of
  // cfg.batch_size (a trailing single sample is dropped, smaller remainders
  // train as a short batch). With a non-empty out_dir, streams loss.csv,
  // saves checkpoint_epochN.dvgn at the checkpoint cadence and model.dvgn
  // at the end.
  LossLog train(const DataSet& data, const std::string& out_dir = "");

  long steps_done() const { return step_; }

 private:
  void zero_grads();
  Tensor batch_tensor(const std::vector<const Grid*>& batch) const;

  HybridModel& model_;
  TrainConfig cfg_;
  AdamOptimizer opt_disc_, opt_gen_, opt_enc_;
  Rng step_rng_, shuffle_rng_;
  long step_ = 0;
};

// One row per latent dimension, `steps` decoded images per row: dimension d
// sweeps linearly over mu_d +- range_sigma while the others stay at the
// encoded mean. With an odd step count the middle column is exactly the
// plain reconstruction. Runs in evaluation mode on frozen statistics.
Grid traversal_grid(HybridModel& model, const Grid& x_ref, real_t range_sigma, int steps);

}  // namespace davegan

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "davegan/layers.hpp"
#include "davegan/rng.hpp"
#include "davegan/tensor.hpp"

namespace davegan {

enum class LayerKind { Conv2D, TranspConv2D };

struct LayerSpec {
  LayerKind kind;
  int filters;
  int kernel;
  int stride;
  Padding padding;
  bool batch_norm;
  Activation activation;
};

struct ArchSpec {
  std::vector<LayerSpec> layers;
};

struct HybridArchSpec {
  int image_size;
  int z_dim;
  ArchSpec encoder, generator, discriminator;
};

// The two architecture families, keyed by image size: 32 uses four-layer
// stacks, 64 five-layer stacks. The encoder's last layer emits 2 * z_dim
// channels (mean and log-variance), the generator consumes z_dim channels.
HybridArchSpec hybrid_arch(int image_size, int z_dim);

// Canonical one-line description of a hybrid architecture and its FNV-1a
// hash; the hash is stored in checkpoints so a file identifies its family.
std::string arch_string(const HybridArchSpec& spec);
std::uint64_t arch_hash(const HybridArchSpec& spec);

// A convolutional stack owning its parameters and batchnorm state. With a
// tape the forward pass is recorded and differentiable; with tape == nullptr
// it is a plain evaluation. training selects batch vs running statistics.
class ConvNet {
 public:
  ConvNet(std::string name, const ArchSpec& arch, int in_channels, Rng& rng);

  Tensor forward(Tape* tape, const Tensor& x, bool training);
  std::vector<Variable*> params();

  // Everything a checkpoint must carry, in a stable order: parameters first
  // (w, b, gamma, beta per layer), then batchnorm running statistics.
  struct StateEntry {
    std::string name;
    Shape shape;
    std::vector<real_t>* data;
  };
  std::vector<StateEntry> state_entries();

 private:
  struct Layer {
    LayerSpec spec;
    Variable w, b;
    std::optional<Variable> gamma, beta;
    std::optional<BatchNormState> bn;
  };
  std::string name_;
  std::vector<Layer> layers_;
};

struct LatentDist {
  Tensor mu;       // [B, z_dim]
  Tensor log_var;  // [B, z_dim]
};

// z = mu + exp(log_var / 2) * eps, elementwise; eps is the caller's draw
Tensor reparametrize(const LatentDist& q, const Tensor& eps);

// detached [batch, z_dim] of standard normal draws
Tensor sample_noise(Rng& rng, int batch, int z_dim);

// Encoder, generator and discriminator bundled with their shared latent
// geometry. The generator doubles as the VAE decoder.
class HybridModel {
 public:
  HybridModel(const HybridArchSpec& arch, std::uint64_t init_seed);

  // x: [B, 1, S, S] -> mean and log-variance, each [B, z_dim]
  LatentDist encode(Tape* tape, const Tensor& x, bool training);
  // z: [B, z_dim] or [B, z_dim, 1, 1] -> [B, 1, S, S]
  Tensor generate(Tape* tape, const Tensor& z, bool training);
  // x: [B, 1, S, S] -> scores [B], strictly inside (0, 1)
  Tensor discriminate(Tape* tape, const Tensor& x, bool training);

  int z_dim() const { return arch_.z_dim; }
  int image_size() const { return arch_.image_size; }
  const HybridArchSpec& arch() const { return arch_; }

  std::vector<Variable*> encoder_params() { return encoder_.params(); }
  std::vector<Variable*> generator_params() { return generator_.params(); }
  std::vector<Variable*> discriminator_params() { return discriminator_.params(); }

  // Checkpoint layout: "DVGN", format version, z_dim, architecture hash,
  // then self-delimiting per-entry records with 32-bit values. Loading
  // resolves the architecture from (z_dim, hash) alone.
  void save(const std::string& path) const;
  static HybridModel load(const std::string& path);

 private:
  std::vector<ConvNet::StateEntry> all_state() const;

  HybridArchSpec arch_;
  ConvNet encoder_, generator_, discriminator_;
};

}  // namespace davegan

#pragma once

// Small encoders from braid words to R^n with hand-written backpropagation.
//
// Parameters live in one flat vector; layers are shape descriptors that view
// slices of it. Batches are column-major: one sample per column.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "braidforge/braid.hpp"
#include "braidforge/datagen.hpp"
#include "json.hpp"

namespace braidforge {

enum class Activation { Tanh, LeakyRelu, Gelu, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

inline constexpr double kLeakySlope = 0.01;

enum class Scheme { SignedInteger, OneHot };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

/// Dataset-wide affine map x -> (x - mean) / stddev.
struct Scaler {
  double mean = 0.0;
  double stddev = 1.0;

  double apply(double x) const noexcept { return (x - mean) / stddev; }
  /// Fits over every letter slot of every representative, zero-padded to `length`.
  static Scaler fit(const KnotClassDataset& ds, std::size_t length);
  bool operator==(const Scaler&) const = default;
};

/// Letters as reals, zero-padded to `length`, then scaled. Throws TooLong.
Eigen::VectorXd encode_signed(const BraidWord& w, std::size_t length, const Scaler& scaler);

/// One row per letter with a single 1: sigma_i at column 2(i-1), its inverse
/// at 2(i-1)+1. Throws LetterOutOfRange when |k| > n_strands - 1.
Eigen::MatrixXd encode_one_hot(const BraidWord& w, int n_strands);

struct InputEncoding {
  Scheme scheme = Scheme::SignedInteger;
  int length = 0;     ///< letter slots
  int n_strands = 2;  ///< one-hot width is 2 (n_strands - 1)
  Scaler scaler;

  /// Values per letter slot.
  int channels() const noexcept { return scheme == Scheme::OneHot ? 2 * (n_strands - 1) : 1; }
  int input_dim() const noexcept { return length * channels(); }
  /// Slot-major layout: value (slot p, channel c) sits at p * channels() + c.
  Eigen::VectorXd encode(const BraidWord& w) const;
  Eigen::MatrixXd encode_batch(std::span<const BraidWord> words) const;

  static InputEncoding fit(const KnotClassDataset& ds, Scheme scheme);
  bool operator==(const InputEncoding&) const = default;
};

struct DenseSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::Identity;
  bool operator==(const DenseSpec&) const = default;
};

/// Periodic 1-D convolution whose filters span the whole input, followed by
/// the activation and mean pooling over all shifts. Output size is `filters`.
struct CircularConvSpec {
  int length = 0;
  int channels = 1;
  int filters = 64;
  Activation act = Activation::LeakyRelu;
  bool operator==(const CircularConvSpec&) const = default;
};

using LayerSpec = std::variant<DenseSpec, CircularConvSpec>;

int layer_input_dim(const LayerSpec& l) noexcept;
int layer_output_dim(const LayerSpec& l) noexcept;
std::size_t layer_param_count(const LayerSpec& l) noexcept;

class Encoder {
public:
  Encoder() = default;
  /// Throws ShapeMismatch if consecutive layers do not compose. Parameters
  /// start at zero; call init_uniform for the usual initialisation.
  explicit Encoder(std::vector<LayerSpec> layers);

  /// Uniform in +-1/sqrt(fan_in) for weights and biases.
  void init_uniform(Rng& rng);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  int input_dim() const noexcept;
  int output_dim() const noexcept;
  std::size_t param_count() const noexcept { return static_cast<std::size_t>(params_.size()); }
  Eigen::VectorXd& parameters() noexcept { return params_; }
  const Eigen::VectorXd& parameters() const noexcept { return params_; }

  /// X: input_dim x batch. Throws ShapeMismatch.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;

  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  ///< input of each layer
    std::vector<Eigen::MatrixXd> pre;     ///< pre-activations (conv: stacked per sample)
    Eigen::MatrixXd output;
  };
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Tape& tape) const;

  /// Reverse pass for dL/dOutput; returns dL/dparameters. If `dX` is given it
  /// receives dL/dInput.
  Eigen::VectorXd backward(const Tape& tape, const Eigen::MatrixXd& dOut, Eigen::MatrixXd* dX = nullptr) const;

  nlohmann::json architecture_json() const;
  static Encoder from_architecture_json(const nlohmann::json& j);

private:
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
};

/// 2 hidden layers of 64 tanh units by default, linear embedding head.
Encoder make_mlp(int input_dim, int embedding_dim = 16, std::vector<int> hidden = {64, 64},
                 Activation act = Activation::Tanh);

/// Circular convolution (leaky ReLU, mean pooling) followed by a tanh MLP head.
Encoder make_circular_cnn(int length, int channels, int filters = 64, int embedding_dim = 16,
                          std::vector<int> hidden = {64, 64});

struct LossAndGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;  ///< dL/dEmbedding, embedding_dim x batch
};

/// Loss and parameter gradient for a batch under `loss_fn(embeddings)`.
template <class LossFn>
std::pair<double, Eigen::VectorXd> gradients(const Encoder& enc, const Eigen::MatrixXd& X, LossFn&& loss_fn) {
  Encoder::Tape tape;
  const Eigen::MatrixXd E = enc.forward(X, tape);
  LossAndGrad lg = loss_fn(E);
  return {lg.loss, enc.backward(tape, lg.grad)};
}

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

/// Bias-corrected Adam update. Moments are created on the first call. Throws ShapeMismatch.
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad);

struct Checkpoint {
  Encoder encoder;
  InputEncoding encoding;
  nlohmann::json meta = nlohmann::json::object();
};

/// "bf-ckpt-1" container: magic line, little-endian u64 header length, JSON
/// header, then little-endian float64 parameters.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws FormatError.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace braidforge

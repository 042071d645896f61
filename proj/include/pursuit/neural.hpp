#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "pursuit/random.hpp"

namespace pursuit::neural {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class OutputActivation : std::uint8_t { Identity = 0, Tanh = 1 };

/// Per-layer weight matrices (out x in, row-major) and bias vectors. Used for
/// parameters, gradients and optimizer moments alike.
struct ParamTensors {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static ParamTensors zeros(std::span<const std::size_t> layer_dims);

  std::size_t size() const;
  bool all_finite() const;
  bool same_shape(const ParamTensors& other) const;
  double squared_norm() const;
  void scale(double s);

  bool operator==(const ParamTensors&) const = default;
};

/// Dense MLP: ReLU on hidden layers, configurable output head.
struct MlpParams : ParamTensors {
  std::vector<std::size_t> layer_dims;
  OutputActivation output_activation = OutputActivation::Identity;

  static MlpParams zeros(std::vector<std::size_t> layer_dims, OutputActivation out);
  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static MlpParams glorot(std::vector<std::size_t> layer_dims, OutputActivation out, Rng& rng);

  std::size_t num_layers() const { return layer_dims.empty() ? 0 : layer_dims.size() - 1; }
  std::size_t input_size() const { return layer_dims.front(); }
  std::size_t output_size() const { return layer_dims.back(); }

  bool operator==(const MlpParams&) const = default;
};

/// Activations retained by forward() for the matching backward() call.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;    // input to layer l (row per sample)
  std::vector<Matrix> preactivations;  // affine output of layer l
  Matrix output;
};

/// Batched forward pass; one sample per row. Throws std::invalid_argument on a
/// column count different from layer_dims[0].
ForwardCache forward(const MlpParams& net, const Matrix& input);

/// Single-sample convenience wrapper.
std::vector<double> forward(const MlpParams& net, std::span<const double> input);

struct Gradients {
  ParamTensors params;  // empty when not requested
  Matrix input;
};

/// Reverse-mode gradients of sum_b <output_b, output_grad_b> with respect to
/// the parameters (summed over the batch) and the input (per row). ReLU uses
/// subgradient 0 at exactly 0. `preactivation_grad`, when given, is added to
/// the gradient of the last layer's pre-activation (same shape as the output).
Gradients backward(const MlpParams& net, const ForwardCache& cache, const Matrix& output_grad,
                   bool want_param_grads = true, const Matrix* preactivation_grad = nullptr);

enum class OptimizerKind : std::uint8_t { Adam = 0, Sgd = 1 };

struct AdamState {
  OptimizerKind kind = OptimizerKind::Adam;
  ParamTensors first_moment;
  ParamTensors second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& net, double learning_rate,
                              OptimizerKind kind = OptimizerKind::Adam);

  bool operator==(const AdamState&) const = default;
};

enum class StepStatus { Applied, RejectedNonFinite };

/// Bias-corrected Adam update (or plain SGD). Non-finite gradients leave both
/// the parameters and the optimizer state untouched.
StepStatus adam_step(MlpParams& net, const ParamTensors& grads, AdamState& opt);

/// Rescales grads to at most max_norm (no-op when max_norm <= 0). Returns the
/// norm before clipping.
double clip_grad_norm(ParamTensors& grads, double max_norm);

/// Checkpoint record: magic "SPNN1", layer_dims, little-endian f64 weights and
/// biases per layer, then optional optimizer state.
void write_mlp(std::ostream& os, const MlpParams& net, const AdamState* opt = nullptr);

struct MlpRecord {
  MlpParams net;
  std::optional<AdamState> optimizer;
};

/// Throws std::runtime_error on a bad magic string or truncated input.
MlpRecord read_mlp(std::istream& is);

}  // namespace pursuit::neural

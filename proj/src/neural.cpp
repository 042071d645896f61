#include "pursuit/neural.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pursuit::neural {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

template <typename Fn>
void for_each_value(ParamTensors& t, Fn&& fn) {
  for (auto& w : t.weights)
    for (double& x : w) fn(x);
  for (auto& b : t.biases)
    for (double& x : b) fn(x);
}

template <typename Fn>
void for_each_value(const ParamTensors& t, Fn&& fn) {
  for (const auto& w : t.weights)
    for (double x : w) fn(x);
  for (const auto& b : t.biases)
    for (double x : b) fn(x);
}

}  // namespace

ParamTensors ParamTensors::zeros(std::span<const std::size_t> layer_dims) {
  ParamTensors t;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    t.weights.emplace_back(layer_dims[l] * layer_dims[l + 1], 0.0);
    t.biases.emplace_back(layer_dims[l + 1], 0.0);
  }
  return t;
}

std::size_t ParamTensors::size() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

bool ParamTensors::all_finite() const {
  bool ok = true;
  for_each_value(*this, [&](double x) { ok = ok && std::isfinite(x); });
  return ok;
}

bool ParamTensors::same_shape(const ParamTensors& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].size() != other.weights[l].size()) return false;
  }
  for (std::size_t l = 0; l < biases.size(); ++l) {
    if (biases[l].size() != other.biases[l].size()) return false;
  }
  return true;
}

double ParamTensors::squared_norm() const {
  double s = 0.0;
  for_each_value(*this, [&](double x) { s += x * x; });
  return s;
}

void ParamTensors::scale(double s) {
  for_each_value(*this, [&](double& x) { x *= s; });
}

MlpParams MlpParams::zeros(std::vector<std::size_t> layer_dims, OutputActivation out) {
  if (layer_dims.size() < 2) throw std::invalid_argument("MlpParams: need at least two layer dims");
  for (std::size_t d : layer_dims) {
    if (d == 0) throw std::invalid_argument("MlpParams: zero-width layer");
  }
  MlpParams net;
  static_cast<ParamTensors&>(net) = ParamTensors::zeros(layer_dims);
  net.layer_dims = std::move(layer_dims);
  net.output_activation = out;
  return net;
}

MlpParams MlpParams::glorot(std::vector<std::size_t> layer_dims, OutputActivation out, Rng& rng) {
  MlpParams net = zeros(std::move(layer_dims), out);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double fan = static_cast<double>(net.layer_dims[l] + net.layer_dims[l + 1]);
    const double limit = std::sqrt(6.0 / fan);
    for (double& w : net.weights[l]) w = rng.uniform(-limit, limit);
  }
  return net;
}

ForwardCache forward(const MlpParams& net, const Matrix& input) {
  if (static_cast<std::size_t>(input.cols()) != net.input_size()) {
    throw std::invalid_argument("forward: input width " + std::to_string(input.cols()) +
                                " does not match layer_dims[0] = " +
                                std::to_string(net.input_size()));
  }
  const std::size_t layers = net.num_layers();
  ForwardCache cache;
  cache.layer_inputs.reserve(layers);
  cache.preactivations.reserve(layers);
  cache.layer_inputs.push_back(input);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<Eigen::Index>(net.layer_dims[l]);
    const auto out = static_cast<Eigen::Index>(net.layer_dims[l + 1]);
    const Matrix w = ConstMap(net.weights[l].data(), out, in);
    Eigen::Map<const RowVec> b(net.biases[l].data(), out);
    Matrix z = cache.layer_inputs[l] * w.transpose();
    z.rowwise() += b;
    if (l + 1 < layers) {
      cache.layer_inputs.push_back(z.cwiseMax(0.0));
    } else if (net.output_activation == OutputActivation::Tanh) {
      cache.output = z.array().tanh().matrix();
    } else {
      cache.output = z;
    }
    cache.preactivations.push_back(std::move(z));
  }
  return cache;
}

std::vector<double> forward(const MlpParams& net, std::span<const double> input) {
  Matrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = input[i];
  const ForwardCache cache = forward(net, x);
  return {cache.output.data(), cache.output.data() + cache.output.size()};
}

Gradients backward(const MlpParams& net, const ForwardCache& cache, const Matrix& output_grad,
                   bool want_param_grads, const Matrix* preactivation_grad) {
  const std::size_t layers = net.num_layers();
  if (cache.preactivations.size() != layers || output_grad.rows() != cache.output.rows() ||
      output_grad.cols() != cache.output.cols()) {
    throw std::invalid_argument("backward: cache or output gradient shape mismatch");
  }
  Gradients g;
  if (want_param_grads) g.params = ParamTensors::zeros(net.layer_dims);

  Matrix delta;
  if (net.output_activation == OutputActivation::Tanh) {
    delta = output_grad.array() * (1.0 - cache.output.array().square());
  } else {
    delta = output_grad;
  }
  if (preactivation_grad != nullptr) {
    if (preactivation_grad->rows() != delta.rows() || preactivation_grad->cols() != delta.cols()) {
      throw std::invalid_argument("backward: pre-activation gradient shape mismatch");
    }
    delta += *preactivation_grad;
  }
  for (std::size_t l = layers; l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(net.layer_dims[l]);
    const auto out = static_cast<Eigen::Index>(net.layer_dims[l + 1]);
    if (want_param_grads) {
      const Matrix dw = delta.transpose() * cache.layer_inputs[l];
      MutMap(g.params.weights[l].data(), out, in) = dw;
      const RowVec db = delta.colwise().sum();
      Eigen::Map<RowVec>(g.params.biases[l].data(), out) = db;
    }
    const Matrix w = ConstMap(net.weights[l].data(), out, in);
    Matrix upstream = delta * w;
    if (l == 0) {
      g.input = std::move(upstream);
    } else {
      const Matrix& z = cache.preactivations[l - 1];
      delta = (z.array() > 0.0).select(upstream.array(), 0.0).matrix();
    }
  }
  return g;
}

AdamState AdamState::for_params(const MlpParams& net, double learning_rate, OptimizerKind kind) {
  AdamState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  s.first_moment = ParamTensors::zeros(net.layer_dims);
  s.second_moment = ParamTensors::zeros(net.layer_dims);
  return s;
}

StepStatus adam_step(MlpParams& net, const ParamTensors& grads, AdamState& opt) {
  if (!grads.same_shape(net) || !opt.first_moment.same_shape(net) ||
      !opt.second_moment.same_shape(net)) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (!grads.all_finite()) return StepStatus::RejectedNonFinite;

  opt.step_count += 1;
  const double lr = opt.learning_rate;
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v, double c1, double c2) {
    if (opt.kind == OptimizerKind::Sgd) {
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
      return;
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  };
  const double t = static_cast<double>(opt.step_count);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    update(net.weights[l], grads.weights[l], opt.first_moment.weights[l],
           opt.second_moment.weights[l], c1, c2);
    update(net.biases[l], grads.biases[l], opt.first_moment.biases[l],
           opt.second_moment.biases[l], c1, c2);
  }
  return StepStatus::Applied;
}

double clip_grad_norm(ParamTensors& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

// ---- serialization --------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'S', 'P', 'N', 'N', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

void put_tensors(std::ostream& os, const ParamTensors& t) {
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    for (double x : t.weights[l]) put_f64(os, x);
    for (double x : t.biases[l]) put_f64(os, x);
  }
}

void read_exact(std::istream& is, unsigned char* dst, std::size_t n) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw std::runtime_error("SPNN1: truncated record");
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  read_exact(is, b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  read_exact(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint8_t get_u8(std::istream& is) {
  unsigned char b;
  read_exact(is, &b, 1);
  return b;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void get_tensors(std::istream& is, ParamTensors& t) {
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    for (double& x : t.weights[l]) x = get_f64(is);
    for (double& x : t.biases[l]) x = get_f64(is);
  }
}

}  // namespace

void write_mlp(std::ostream& os, const MlpParams& net, const AdamState* opt) {
  os.write(kMagic, sizeof kMagic);
  put_u8(os, static_cast<std::uint8_t>(net.output_activation));
  put_u32(os, static_cast<std::uint32_t>(net.layer_dims.size()));
  for (std::size_t d : net.layer_dims) put_u64(os, d);
  put_tensors(os, net);
  put_u8(os, opt != nullptr ? 1 : 0);
  if (opt != nullptr) {
    put_u8(os, static_cast<std::uint8_t>(opt->kind));
    put_f64(os, opt->learning_rate);
    put_f64(os, opt->beta1);
    put_f64(os, opt->beta2);
    put_f64(os, opt->epsilon);
    put_u64(os, opt->step_count);
    put_tensors(os, opt->first_moment);
    put_tensors(os, opt->second_moment);
  }
  if (!os) throw std::runtime_error("SPNN1: write failed");
}

MlpRecord read_mlp(std::istream& is) {
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (is.gcount() != sizeof magic || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("SPNN1: bad magic");
  }
  const std::uint8_t act = get_u8(is);
  if (act > 1) throw std::runtime_error("SPNN1: unknown output activation");
  const std::uint32_t n_dims = get_u32(is);
  if (n_dims < 2 || n_dims > 64) throw std::runtime_error("SPNN1: implausible layer count");
  std::vector<std::size_t> dims(n_dims);
  for (auto& d : dims) {
    d = get_u64(is);
    if (d == 0 || d > (1u << 20)) throw std::runtime_error("SPNN1: implausible layer width");
  }
  MlpRecord rec;
  rec.net = MlpParams::zeros(dims, static_cast<OutputActivation>(act));
  get_tensors(is, rec.net);
  if (get_u8(is) != 0) {
    AdamState opt = AdamState::for_params(rec.net, 0.0);
    const std::uint8_t kind = get_u8(is);
    if (kind > 1) throw std::runtime_error("SPNN1: unknown optimizer kind");
    opt.kind = static_cast<OptimizerKind>(kind);
    opt.learning_rate = get_f64(is);
    opt.beta1 = get_f64(is);
    opt.beta2 = get_f64(is);
    opt.epsilon = get_f64(is);
    opt.step_count = get_u64(is);
    get_tensors(is, opt.first_moment);
    get_tensors(is, opt.second_moment);
    rec.optimizer = std::move(opt);
  }
  return rec;
}

}  // namespace pursuit::neural

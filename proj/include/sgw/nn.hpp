#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sgw/autodiff.hpp"
#include "sgw/embedding.hpp"
#include "sgw/errors.hpp"
#include "sgw/matrix.hpp"
#include "sgw/rng.hpp"

namespace sgw::nn {

using ad::Tape;
using ad::Var;

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, LeakyRelu = 2, Tanh = 3 };

inline constexpr double kLeakySlope = 0.2;

inline double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::LeakyRelu: return z > 0.0 ? z : kLeakySlope * z;
    case Activation::Tanh: return std::tanh(z);
  }
  return z;
}

// Derivative as a function of the pre-activation (and the output for tanh).
inline double activation_slope(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::LeakyRelu: return z > 0.0 ? 1.0 : kLeakySlope;
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

struct DenseLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
  Activation act = Activation::Identity;
};

// Small feed-forward network usable as generator or critic. A residual net
// computes x + f(x) (enhancement-style skip connection); its input and
// output dimensions must match.
class DenseNet {
 public:
  DenseNet() = default;

  // dims = {in, h1, ..., out}; acts has one entry per layer.
  DenseNet(const std::vector<std::size_t>& dims, const std::vector<Activation>& acts,
           bool residual = false)
      : residual_(residual) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
      throw InvalidArgument("DenseNet: need k+1 dims and k activations");
    if (residual && dims.front() != dims.back())
      throw InvalidArgument("DenseNet: a residual net needs matching in/out dims");
    layers_.reserve(acts.size());
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      layers_.push_back(DenseLayer{Matrix(dims[l], dims[l + 1]), Matrix(1, dims[l + 1]), acts[l]});
  }

  // He-style uniform init scaled by fan-in, deterministic from the rng.
  void init_he(SeededRng& rng) {
    for (auto& layer : layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows()));
      for (std::size_t i = 0; i < layer.weight.size(); ++i)
        layer.weight.data()[i] = rng.uniform(-limit, limit);
      for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = 0.0;
    }
  }

  // Zero the final layer so a residual net starts as the identity map.
  void zero_last_layer() {
    auto& last = layers_.back();
    last.weight = Matrix(last.weight.rows(), last.weight.cols());
    last.bias = Matrix(1, last.bias.cols());
  }

  bool residual() const { return residual_; }

  std::size_t input_dim() const { return layers_.front().weight.rows(); }
  std::size_t output_dim() const { return layers_.back().weight.cols(); }
  std::size_t layer_count() const { return layers_.size(); }
  const DenseLayer& layer(std::size_t l) const { return layers_[l]; }
  DenseLayer& layer(std::size_t l) { return layers_[l]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.all_finite() || !l.bias.all_finite()) return false;
    return true;
  }

  // Plain forward pass, no tape.
  Matrix forward_plain(const Matrix& batch) const {
    if (batch.cols() != input_dim())
      throw DimensionMismatch("DenseNet: batch dim " + std::to_string(batch.cols()) +
                              " != input dim " + std::to_string(input_dim()));
    Matrix x = batch;
    for (const auto& layer : layers_) {
      Matrix z = matmul(x, layer.weight);
      for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j)
          z(i, j) = apply_activation(layer.act, z(i, j) + layer.bias(0, j));
      x = std::move(z);
    }
    if (residual_) x += batch;
    return x;
  }

 private:
  std::vector<DenseLayer> layers_;
  bool residual_ = false;
};

// Parameter leaves of one network on a tape, in layer order.
struct NetVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

inline NetVars push_params(Tape& tape, const DenseNet& net) {
  NetVars vars;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    vars.weights.push_back(tape.leaf(net.layer(l).weight));
    vars.biases.push_back(tape.leaf(net.layer(l).bias));
  }
  return vars;
}

inline Var activation_var(Tape& tape, Var z, Activation act) {
  if (act == Activation::Identity) return z;
  const Matrix& zin = tape.value(z);
  Matrix mask(zin.rows(), zin.cols());
  switch (act) {
    case Activation::Relu:
    case Activation::LeakyRelu: {
      for (std::size_t i = 0; i < zin.size(); ++i)
        mask.data()[i] = activation_slope(act, zin.data()[i]);
      return tape.mul_const(z, mask);
    }
    case Activation::Tanh: {
      // tanh is not piecewise linear; use a dedicated mask of 1 - tanh^2.
      for (std::size_t i = 0; i < zin.size(); ++i) {
        const double t = std::tanh(zin.data()[i]);
        mask.data()[i] = t;
      }
      // Value is tanh(z) but gradient must be (1 - tanh^2) dz; express as
      // mul_const against the derivative mask after rebuilding the value.
      Matrix slope(zin.rows(), zin.cols());
      for (std::size_t i = 0; i < zin.size(); ++i)
        slope.data()[i] = 1.0 - mask.data()[i] * mask.data()[i];
      Var lin = tape.mul_const(z, slope);  // carries the right gradient
      // Replace the value with the true tanh output: tanh(z) = slope*z + r,
      // where the residual r is constant for the backward pass.
      Matrix residual(zin.rows(), zin.cols());
      for (std::size_t i = 0; i < zin.size(); ++i)
        residual.data()[i] = mask.data()[i] - slope.data()[i] * zin.data()[i];
      return tape.add_const(lin, residual);
    }
    default: return z;
  }
}

// Forward with parameters as tape leaves and a variable input.
inline Var apply_net(Tape& tape, const DenseNet& net, const NetVars& vars, Var input) {
  Var x = input;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Var z = tape.matmul(x, vars.weights[l]);
    z = tape.add_row_broadcast(z, vars.biases[l]);
    x = activation_var(tape, z, net.layer(l).act);
  }
  if (net.residual()) x = tape.add(x, input);
  return x;
}

// Forward with parameters as tape leaves and a constant input batch.
inline Var apply_net(Tape& tape, const DenseNet& net, const NetVars& vars, const Matrix& input) {
  Var x;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Var z = l == 0 ? tape.matmul_const_left(input, vars.weights[l])
                   : tape.matmul(x, vars.weights[l]);
    z = tape.add_row_broadcast(z, vars.biases[l]);
    x = activation_var(tape, z, net.layer(l).act);
  }
  if (net.residual()) x = tape.add_const(x, input);
  return x;
}

// Forward with frozen parameters (constants) and a variable input; used for
// the adversarial term where critic parameters must not receive gradient.
inline Var apply_net_const_params(Tape& tape, const DenseNet& net, Var input) {
  Var x = input;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Var z = tape.matmul_const_right(x, net.layer(l).weight);
    Matrix brow(tape.value(z).rows(), tape.value(z).cols());
    for (std::size_t i = 0; i < brow.rows(); ++i)
      for (std::size_t j = 0; j < brow.cols(); ++j) brow(i, j) = net.layer(l).bias(0, j);
    z = tape.add_const(z, brow);
    x = activation_var(tape, z, net.layer(l).act);
  }
  if (net.residual()) x = tape.add(x, input);
  return x;
}

struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  ParamGrads& operator+=(const ParamGrads& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += o.weights[l];
      biases[l] += o.biases[l];
    }
    return *this;
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.all_finite()) return false;
    for (const auto& b : biases)
      if (!b.all_finite()) return false;
    return true;
  }
};

inline ParamGrads collect_grads(const Tape& tape, const NetVars& vars) {
  ParamGrads g;
  for (std::size_t l = 0; l < vars.weights.size(); ++l) {
    g.weights.push_back(tape.grad(vars.weights[l]));
    g.biases.push_back(tape.grad(vars.biases[l]));
  }
  return g;
}

// ---- gradient penalty ----

// Tape expression for mean_i (||grad_x D(x_i)|| - 1)^2 at the constant batch
// interp. The input gradient of D is rebuilt symbolically from the layer
// weights with the activation slopes frozen at their forward values; relu
// and leaky-relu slopes are locally constant, so the resulting parameter
// gradients are exact almost everywhere. Tanh critics are rejected.
inline Var gradient_penalty_expr(Tape& tape, const DenseNet& net, const NetVars& vars,
                                 const Matrix& interp) {
  if (net.residual())
    throw InvalidArgument("gradient_penalty: residual critics are not supported");
  const std::size_t n = interp.rows();
  // Forward to collect pre-activation slope masks.
  std::vector<Matrix> masks(net.layer_count());
  Matrix x = interp;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layer(l);
    if (layer.act == Activation::Tanh)
      throw InvalidArgument("gradient_penalty: tanh critics are not supported");
    Matrix z = matmul(x, layer.weight);
    Matrix mask(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) {
        const double zb = z(i, j) + layer.bias(0, j);
        z(i, j) = apply_activation(layer.act, zb);
        mask(i, j) = activation_slope(layer.act, zb);
      }
    masks[l] = std::move(mask);
    x = std::move(z);
  }
  if (net.output_dim() != 1)
    throw ShapeMismatch("gradient_penalty: critic must map to a scalar");

  // Backward chain G_{l-1} = (G_l o mask_l) W_l^T, seeded with d out/d out = 1.
  const std::size_t last = net.layer_count() - 1;
  Var g = tape.matmul_const_bt(masks[last], vars.weights[last]);  // masks[last] is n x 1
  for (std::size_t l = last; l-- > 0;) {
    Var h = tape.mul_const(g, masks[l]);
    g = tape.matmul_bt(h, vars.weights[l]);
  }
  // mean over the batch of (||g_i|| - 1)^2
  Var norms = tape.sqrt_ew(tape.row_sumsq(g));
  Var centered = tape.add_scalar(norms, -1.0);
  Var penalty = tape.scale(tape.sum_all(tape.square(centered)), 1.0 / static_cast<double>(n));
  return penalty;
}

struct GradPenaltyResult {
  double penalty = 0.0;
  ParamGrads grads;
};

// Standalone gradient penalty on interpolates u*real + (1-u)*fake with
// u ~ Uniform(0,1) per sample pair.
inline GradPenaltyResult grad_penalty(const DenseNet& critic, const Matrix& real,
                                      const Matrix& fake, SeededRng& rng) {
  if (!real.same_shape(fake)) throw ShapeMismatch("grad_penalty: batch shapes differ");
  Matrix interp(real.rows(), real.cols());
  for (std::size_t i = 0; i < real.rows(); ++i) {
    const double u = rng.uniform();
    for (std::size_t j = 0; j < real.cols(); ++j)
      interp(i, j) = u * real(i, j) + (1.0 - u) * fake(i, j);
  }
  Tape tape;
  NetVars vars = push_params(tape, critic);
  Var penalty = gradient_penalty_expr(tape, critic, vars, interp);
  tape.backward_scalar(penalty);
  return GradPenaltyResult{tape.scalar(penalty), collect_grads(tape, vars)};
}

// ---- Adam ----

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> m_weights, v_weights, m_biases, v_biases;

  static AdamState for_net(const DenseNet& net, double lr, double b1 = 0.9, double b2 = 0.999,
                           double eps = 1e-8) {
    AdamState s;
    s.learning_rate = lr;
    s.beta1 = b1;
    s.beta2 = b2;
    s.epsilon = eps;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      const auto& layer = net.layer(l);
      s.m_weights.emplace_back(layer.weight.rows(), layer.weight.cols());
      s.v_weights.emplace_back(layer.weight.rows(), layer.weight.cols());
      s.m_biases.emplace_back(1, layer.bias.cols());
      s.v_biases.emplace_back(1, layer.bias.cols());
    }
    return s;
  }
};

namespace detail_adam {

inline void update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, const AdamState& s,
                   double bc1, double bc2) {
  if (!param.same_shape(grad)) throw ShapeMismatch("adam_step: gradient shape mismatch");
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data()[i];
    m.data()[i] = s.beta1 * m.data()[i] + (1.0 - s.beta1) * g;
    v.data()[i] = s.beta2 * v.data()[i] + (1.0 - s.beta2) * g * g;
    const double mhat = m.data()[i] / bc1;
    const double vhat = v.data()[i] / bc2;
    param.data()[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

}  // namespace detail_adam

// Standard bias-corrected Adam update over all layers.
inline void adam_step(DenseNet& net, const ParamGrads& grads, AdamState& state) {
  if (grads.weights.size() != net.layer_count())
    throw ShapeMismatch("adam_step: gradient layer count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    detail_adam::update(net.layer(l).weight, grads.weights[l], state.m_weights[l],
                        state.v_weights[l], state, bc1, bc2);
    detail_adam::update(net.layer(l).bias, grads.biases[l], state.m_biases[l], state.v_biases[l],
                        state, bc1, bc2);
  }
}

// ---- checkpoints ----

inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'W', 'N'};

inline void save_checkpoint(const DenseNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MalformedFile(path + ": cannot open for writing");
  out.write(kCheckpointMagic, 4);
  sgw::detail::write_u32le(out, static_cast<std::uint32_t>(net.layer_count()));
  const unsigned char residual = net.residual() ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&residual), 1);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layer(l);
    sgw::detail::write_u32le(out, static_cast<std::uint32_t>(layer.weight.rows()));
    sgw::detail::write_u32le(out, static_cast<std::uint32_t>(layer.weight.cols()));
    const unsigned char tag = static_cast<unsigned char>(layer.act);
    out.write(reinterpret_cast<const char*>(&tag), 1);
  }
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layer(l);
    for (std::size_t i = 0; i < layer.weight.size(); ++i)
      sgw::detail::write_f64le(out, layer.weight.data()[i]);
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
      sgw::detail::write_f64le(out, layer.bias.data()[i]);
  }
}

inline DenseNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile(path + ": cannot open");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw MalformedFile(path + ": bad magic, expected SGWN");
  const std::uint32_t count = sgw::detail::read_u32le(in, path);
  if (count == 0) throw MalformedFile(path + ": zero layers");
  unsigned char residual;
  if (!in.read(reinterpret_cast<char*>(&residual), 1)) throw MalformedFile(path + ": truncated");
  std::vector<std::size_t> dims;
  std::vector<Activation> acts;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t rows = sgw::detail::read_u32le(in, path);
    const std::uint32_t cols = sgw::detail::read_u32le(in, path);
    unsigned char tag;
    if (!in.read(reinterpret_cast<char*>(&tag), 1)) throw MalformedFile(path + ": truncated");
    if (tag > 3) throw MalformedFile(path + ": unknown activation tag");
    if (l == 0) dims.push_back(rows);
    if (!dims.empty() && dims.back() != rows) throw MalformedFile(path + ": layer dims do not chain");
    dims.push_back(cols);
    acts.push_back(static_cast<Activation>(tag));
    shapes.emplace_back(rows, cols);
  }
  DenseNet net(dims, acts, residual != 0);
  for (std::uint32_t l = 0; l < count; ++l) {
    auto& layer = net.layer(l);
    for (std::size_t i = 0; i < layer.weight.size(); ++i)
      layer.weight.data()[i] = sgw::detail::read_f64le(in, path);
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
      layer.bias.data()[i] = sgw::detail::read_f64le(in, path);
  }
  return net;
}

}  // namespace sgw::nn

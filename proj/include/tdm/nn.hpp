#pragma once

// Dense multilayer perceptrons with hand-written backpropagation, Adam and
// polyak-averaged target copies. Batches are stored column-wise: a matrix of
// shape (features x batch).

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tdm/errors.hpp"

namespace tdm::nn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation { kLinear, kRelu, kTanh };

inline std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kLinear: break;
  }
  return "linear";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "linear") return Activation::kLinear;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

template <typename Scalar>
struct Layer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;    // out
  Activation activation = Activation::kLinear;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// Feed-forward network. Gradients use the same type, so anything
/// "parameter shaped" is an Mlp as well.
template <typename Scalar>
struct Mlp {
  std::vector<Layer<Scalar>> layers;

  Eigen::Index in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  void set_zero() {
    for (auto& l : layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  Mlp zeros_like() const {
    Mlp out = *this;
    out.set_zero();
    return out;
  }

  template <typename Fn>
  void for_each_block(Fn&& fn) {
    for (auto& l : layers) {
      fn(l.weight);
      fn(l.bias);
    }
  }
};

template <typename Scalar>
bool same_shape(const Mlp<Scalar>& a, const Mlp<Scalar>& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    if (a.layers[k].weight.rows() != b.layers[k].weight.rows() ||
        a.layers[k].weight.cols() != b.layers[k].weight.cols() ||
        a.layers[k].bias.size() != b.layers[k].bias.size())
      return false;
  }
  return true;
}

template <typename Scalar>
void require_same_shape(const Mlp<Scalar>& a, const Mlp<Scalar>& b, const char* what) {
  if (!same_shape(a, b))
    throw ShapeError(std::string(what) + ": parameter shapes differ (" +
                     std::to_string(a.parameter_count()) + " vs " +
                     std::to_string(b.parameter_count()) + " parameters)");
}

/// Uniform +-1/sqrt(fan_in) initialization; the last layer is additionally
/// multiplied by `final_scale`.
template <typename Scalar = double>
Mlp<Scalar> make_mlp(int in_dim, std::span<const int> hidden, int out_dim, Activation output,
                     std::mt19937_64& rng, Scalar final_scale = Scalar(1)) {
  Mlp<Scalar> net;
  int prev = in_dim;
  auto add = [&](int out, Activation act, Scalar scale) {
    const Scalar bound = Scalar(1) / std::sqrt(Scalar(prev));
    std::uniform_real_distribution<Scalar> dist(-bound, bound);
    Layer<Scalar> l;
    l.weight.resize(out, prev);
    l.bias.resize(out);
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = scale * dist(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = scale * dist(rng);
    l.activation = act;
    net.layers.push_back(std::move(l));
    prev = out;
  };
  for (int h : hidden) add(h, Activation::kRelu, Scalar(1));
  add(out_dim, output, final_scale);
  return net;
}

template <typename Scalar>
struct ForwardCache {
  std::vector<MatrixX<Scalar>> inputs;  // inputs[k] feeds layer k
  std::vector<MatrixX<Scalar>> outputs; // post-activation of layer k
};

namespace detail {

template <typename Scalar>
void apply_activation(Activation act, MatrixX<Scalar>& z) {
  switch (act) {
    case Activation::kRelu: z = z.cwiseMax(Scalar(0)); break;
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
    case Activation::kLinear: break;
  }
}

template <typename Scalar>
void check_input(const Mlp<Scalar>& net, Eigen::Index rows) {
  if (net.layers.empty()) throw ShapeError("mlp has no layers");
  if (rows != net.in_dim()) throw ShapeError(shape_message("mlp input", net.in_dim(), rows));
}

}  // namespace detail

template <typename Scalar>
MatrixX<Scalar> forward(const Mlp<Scalar>& net, const Eigen::Ref<const MatrixX<Scalar>>& input) {
  detail::check_input(net, input.rows());
  MatrixX<Scalar> x = input;
  for (const auto& l : net.layers) {
    MatrixX<Scalar> z = l.weight * x;
    z.colwise() += l.bias;
    detail::apply_activation(l.activation, z);
    x = std::move(z);
  }
  return x;
}

template <typename Scalar>
VectorX<Scalar> forward(const Mlp<Scalar>& net, const VectorX<Scalar>& input) {
  return forward(net, Eigen::Ref<const MatrixX<Scalar>>(input)).col(0);
}

template <typename Scalar>
const MatrixX<Scalar>& forward(const Mlp<Scalar>& net, const Eigen::Ref<const MatrixX<Scalar>>& input,
                               ForwardCache<Scalar>& cache) {
  detail::check_input(net, input.rows());
  const std::size_t n = net.layers.size();
  cache.inputs.resize(n);
  cache.outputs.resize(n);
  cache.inputs[0] = input;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& l = net.layers[k];
    MatrixX<Scalar>& z = cache.outputs[k];
    z.noalias() = l.weight * cache.inputs[k];
    z.colwise() += l.bias;
    detail::apply_activation(l.activation, z);
    if (k + 1 < n) cache.inputs[k + 1] = z;
  }
  return cache.outputs.back();
}

template <typename Scalar>
struct Gradients {
  Mlp<Scalar> params;
  MatrixX<Scalar> input;
};

/// Gradients of sum over columns of <upstream, output> using intermediates
/// from a prior cached forward pass.
template <typename Scalar>
Gradients<Scalar> backward(const Mlp<Scalar>& net, const ForwardCache<Scalar>& cache,
                           const Eigen::Ref<const MatrixX<Scalar>>& upstream) {
  if (cache.outputs.size() != net.layers.size()) throw ShapeError("forward cache does not match network");
  const auto& out = cache.outputs.back();
  if (upstream.rows() != out.rows()) throw ShapeError(shape_message("mlp upstream", out.rows(), upstream.rows()));
  if (upstream.cols() != out.cols()) throw ShapeError(shape_message("mlp upstream batch", out.cols(), upstream.cols()));

  Gradients<Scalar> g;
  g.params.layers.resize(net.layers.size());
  MatrixX<Scalar> delta = upstream;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& l = net.layers[k];
    const auto& y = cache.outputs[k];
    switch (l.activation) {
      case Activation::kRelu: delta = (y.array() > Scalar(0)).select(delta, Scalar(0)); break;
      case Activation::kTanh: delta.array() *= Scalar(1) - y.array().square(); break;
      case Activation::kLinear: break;
    }
    auto& gl = g.params.layers[k];
    gl.activation = l.activation;
    gl.weight.noalias() = delta * cache.inputs[k].transpose();
    gl.bias = delta.rowwise().sum();
    MatrixX<Scalar> next = l.weight.transpose() * delta;
    delta = std::move(next);
  }
  g.input = std::move(delta);
  return g;
}

template <typename Scalar>
Gradients<Scalar> backward(const Mlp<Scalar>& net, const Eigen::Ref<const MatrixX<Scalar>>& input,
                           const Eigen::Ref<const MatrixX<Scalar>>& upstream) {
  ForwardCache<Scalar> cache;
  forward(net, input, cache);
  return backward(net, cache, upstream);
}

template <typename Scalar>
struct AdamState {
  Mlp<Scalar> first_moment;
  Mlp<Scalar> second_moment;
  std::int64_t step = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  static AdamState for_params(const Mlp<Scalar>& params) {
    AdamState s;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    return s;
  }
};

/// One bias-corrected Adam step, in place.
template <typename Scalar>
void adam_step(Mlp<Scalar>& params, const Mlp<Scalar>& grads, AdamState<Scalar>& state, Scalar learning_rate) {
  require_same_shape(params, grads, "adam gradients");
  require_same_shape(params, state.first_moment, "adam state");
  if (!(learning_rate > Scalar(0))) throw std::invalid_argument("adam learning rate must be positive");
  if (!grads.all_finite()) throw NumericError("adam: non-finite gradient entry");

  ++state.step;
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, t);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
    v = state.beta2 * v + (Scalar(1) - state.beta2) * g.cwiseAbs2();
    p.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& p = params.layers[k];
    const auto& g = grads.layers[k];
    auto& m = state.first_moment.layers[k];
    auto& v = state.second_moment.layers[k];
    update(p.weight, g.weight, m.weight, v.weight);
    update(p.bias, g.bias, m.bias, v.bias);
  }
}

/// Slow-moving copy of a network: target <- rho * target + (1 - rho) * source.
template <typename Scalar>
struct TargetCopy {
  Mlp<Scalar> params;
  Scalar rho = Scalar(0.999);
};

template <typename Scalar>
void polyak_update(Mlp<Scalar>& target, const Mlp<Scalar>& source, Scalar rho) {
  require_same_shape(target, source, "polyak update");
  if (!(rho >= Scalar(0) && rho <= Scalar(1))) throw std::invalid_argument("polyak coefficient must lie in [0, 1]");
  for (std::size_t k = 0; k < source.layers.size(); ++k) {
    auto& t = target.layers[k];
    const auto& s = source.layers[k];
    t.weight = rho * t.weight + (Scalar(1) - rho) * s.weight;
    t.bias = rho * t.bias + (Scalar(1) - rho) * s.bias;
  }
}

template <typename Scalar>
void polyak_update(TargetCopy<Scalar>& target, const Mlp<Scalar>& source) {
  polyak_update(target.params, source, target.rho);
}

// Checkpoint format: one text line per layer "in out activation", a blank
// line, then every weight (column-major) and bias of each layer as
// little-endian IEEE-754 doubles.

namespace detail {

inline void write_f64(std::ostream& os, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  os.write(buf, 8);
}

inline double read_f64(std::istream& is) {
  char buf[8];
  if (!is.read(buf, 8)) throw std::runtime_error("checkpoint: truncated parameter stream");
  std::uint64_t bits;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

template <typename Scalar>
void write_mlp(std::ostream& os, const Mlp<Scalar>& net) {
  for (const auto& l : net.layers)
    os << l.in_dim() << ' ' << l.out_dim() << ' ' << activation_name(l.activation) << '\n';
  os << '\n';
  for (const auto& l : net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) detail::write_f64(os, static_cast<double>(l.weight.data()[i]));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) detail::write_f64(os, static_cast<double>(l.bias(i)));
  }
}

template <typename Scalar = double>
Mlp<Scalar> read_mlp(std::istream& is) {
  Mlp<Scalar> net;
  std::string line;
  while (std::getline(is, line) && !line.empty()) {
    std::istringstream ls(line);
    long in = 0, out = 0;
    std::string act;
    if (!(ls >> in >> out >> act) || in <= 0 || out <= 0)
      throw std::runtime_error("checkpoint: malformed shape line '" + line + "'");
    if (!net.layers.empty() && net.layers.back().out_dim() != in)
      throw ShapeError(shape_message("checkpoint layer chain", net.layers.back().out_dim(), in));
    Layer<Scalar> l;
    l.weight.resize(out, in);
    l.bias.resize(out);
    l.activation = parse_activation(act);
    net.layers.push_back(std::move(l));
  }
  if (net.layers.empty()) throw std::runtime_error("checkpoint: no layers in header");
  for (auto& l : net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = static_cast<Scalar>(detail::read_f64(is));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = static_cast<Scalar>(detail::read_f64(is));
  }
  if (!net.all_finite()) throw NumericError("checkpoint: non-finite parameter");
  return net;
}

}  // namespace tdm::nn

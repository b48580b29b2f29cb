#ifndef AUTOPHOTO_NETCORE_HPP_
#define AUTOPHOTO_NETCORE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "autophoto/rng.hpp"

namespace autophoto::net {

enum class Activation { Identity, Tanh, Relu };

struct LayerSpec {
  enum class Kind { Dense, Lstm };
  Kind kind = Kind::Dense;
  int in = 0;
  int out = 0;  // hidden size for Lstm
  Activation act = Activation::Identity;

  std::size_t param_count() const {
    if (kind == Kind::Lstm)
      return static_cast<std::size_t>(4 * out) * (in + out + 1);
    return static_cast<std::size_t>(out) * (in + 1);
  }
};

LayerSpec dense(int in, int out, Activation act);
LayerSpec lstm_cell(int in, int hidden);

struct NetSpec {
  std::vector<LayerSpec> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  bool has_lstm() const;
  int hidden_size() const;  // 0 when no lstm cell
  std::size_t param_count() const;
  std::size_t layer_offset(std::size_t i) const;
  // throws on incompatible adjacent dims or more than one lstm cell
  void validate() const;
};

struct RecurrentState {
  std::vector<double> h;
  std::vector<double> c;

  static RecurrentState zero(int hidden) {
    return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)};
  }
  bool empty() const { return h.empty(); }
};

// Per-layer forward record, enough for exact reverse mode.
struct LayerTape {
  std::vector<double> input;
  std::vector<double> pre;      // dense pre-activation
  std::vector<double> out;      // post-activation / lstm h'
  // lstm only:
  std::vector<double> gates;    // 4H post-activation, order i,f,g,o
  std::vector<double> h_prev;
  std::vector<double> c_prev;
  std::vector<double> c_new;
  std::vector<double> tanh_c;
};

struct Tape {
  std::vector<LayerTape> layers;
};

struct ForwardOut {
  std::vector<double> output;
  RecurrentState state;  // unchanged copy when the net has no lstm cell
};

ForwardOut forward(const NetSpec& spec, std::span<const double> params,
                   std::span<const double> input, const RecurrentState* state,
                   Tape* tape = nullptr);

struct BackwardOut {
  std::vector<double> input_grad;
  RecurrentState state_grad;  // gradient w.r.t. the incoming (h, c)
};

// Accumulates into param_grads (caller zeroes when needed). state_grad_in
// carries gradient flowing into the new state from later time steps.
BackwardOut backward(const NetSpec& spec, std::span<const double> params,
                     const Tape& tape, std::span<const double> out_grad,
                     const RecurrentState* state_grad_in,
                     std::span<double> param_grads);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long t = 0;

  static AdamState zero(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
  }
};

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// loss(output) -> (value, d loss / d output)
using LossFn =
    std::function<std::pair<double, std::vector<double>>(std::span<const double>)>;

// Max relative error between analytic and central-difference gradients.
// Checks at most max_coords coordinates (seeded subset for large nets).
double finite_diff_check(const NetSpec& spec, std::span<const double> params,
                         std::span<const double> input,
                         const RecurrentState* state, const LossFn& loss,
                         double h, std::size_t max_coords = 4096,
                         std::uint64_t seed = 0);

void init_params(const NetSpec& spec, Rng& rng, std::span<double> out);

}  // namespace autophoto::net

#endif  // AUTOPHOTO_NETCORE_HPP_

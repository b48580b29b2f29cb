#include "autophoto/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace autophoto::net {

LayerSpec dense(int in, int out, Activation act) {
  return {LayerSpec::Kind::Dense, in, out, act};
}

LayerSpec lstm_cell(int in, int hidden) {
  return {LayerSpec::Kind::Lstm, in, hidden, Activation::Identity};
}

bool NetSpec::has_lstm() const {
  for (const auto& l : layers)
    if (l.kind == LayerSpec::Kind::Lstm) return true;
  return false;
}

int NetSpec::hidden_size() const {
  for (const auto& l : layers)
    if (l.kind == LayerSpec::Kind::Lstm) return l.out;
  return 0;
}

std::size_t NetSpec::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

std::size_t NetSpec::layer_offset(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < i; ++j) n += layers[j].param_count();
  return n;
}

void NetSpec::validate() const {
  int lstms = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in <= 0 || l.out <= 0) throw std::invalid_argument("NetSpec: non-positive layer dim");
    if (l.kind == LayerSpec::Kind::Lstm) ++lstms;
    if (i > 0 && layers[i - 1].out != l.in)
      throw std::invalid_argument("NetSpec: adjacent layer dims incompatible");
  }
  if (lstms > 1) throw std::invalid_argument("NetSpec: at most one lstm cell");
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double apply_act(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    default: return x;
  }
}

inline double act_grad(Activation a, double pre, double out) {
  switch (a) {
    case Activation::Tanh: return 1.0 - out * out;
    case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
    default: return 1.0;
  }
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite ") + what);
}

}  // namespace

ForwardOut forward(const NetSpec& spec, std::span<const double> params,
                   std::span<const double> input, const RecurrentState* state,
                   Tape* tape) {
  if (static_cast<int>(input.size()) != spec.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  if (params.size() != spec.param_count())
    throw std::invalid_argument("forward: parameter count mismatch");
  check_finite(input, "input");

  std::vector<double> x(input.begin(), input.end());
  ForwardOut res;
  if (state) res.state = *state;
  if (tape) tape->layers.assign(spec.layers.size(), {});

  std::size_t off = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& l = spec.layers[li];
    LayerTape* lt = tape ? &tape->layers[li] : nullptr;
    if (lt) lt->input = x;

    if (l.kind == LayerSpec::Kind::Dense) {
      const double* w = params.data() + off;            // [out x in]
      const double* b = w + static_cast<std::size_t>(l.out) * l.in;
      std::vector<double> pre(l.out), out(l.out);
      for (int o = 0; o < l.out; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * l.in;
        double acc = b[o];
        for (int i = 0; i < l.in; ++i) acc += row[i] * x[i];
        pre[o] = acc;
        out[o] = apply_act(l.act, acc);
      }
      if (lt) {
        lt->pre = pre;
        lt->out = out;
      }
      x = std::move(out);
    } else {
      const int H = l.out;
      const int I = l.in;
      const double* wih = params.data() + off;                           // [4H x I]
      const double* whh = wih + static_cast<std::size_t>(4 * H) * I;     // [4H x H]
      const double* b = whh + static_cast<std::size_t>(4 * H) * H;       // [4H]
      if (static_cast<int>(res.state.h.size()) != H)
        throw std::invalid_argument("forward: recurrent state size mismatch");
      const std::vector<double> h_prev = res.state.h;
      const std::vector<double> c_prev = res.state.c;

      std::vector<double> gates(4 * H);
      for (int g = 0; g < 4 * H; ++g) {
        const double* ri = wih + static_cast<std::size_t>(g) * I;
        const double* rh = whh + static_cast<std::size_t>(g) * H;
        double acc = b[g];
        for (int i = 0; i < I; ++i) acc += ri[i] * x[i];
        for (int i = 0; i < H; ++i) acc += rh[i] * h_prev[i];
        gates[g] = acc;
      }
      std::vector<double> c_new(H), h_new(H), tanh_c(H);
      for (int j = 0; j < H; ++j) {
        const double ig = sigmoid(gates[j]);
        const double fg = sigmoid(gates[H + j]);
        const double gg = std::tanh(gates[2 * H + j]);
        const double og = sigmoid(gates[3 * H + j]);
        gates[j] = ig;
        gates[H + j] = fg;
        gates[2 * H + j] = gg;
        gates[3 * H + j] = og;
        c_new[j] = fg * c_prev[j] + ig * gg;
        tanh_c[j] = std::tanh(c_new[j]);
        h_new[j] = og * tanh_c[j];
      }
      if (lt) {
        lt->gates = gates;
        lt->h_prev = h_prev;
        lt->c_prev = c_prev;
        lt->c_new = c_new;
        lt->tanh_c = tanh_c;
        lt->out = h_new;
      }
      res.state.h = h_new;
      res.state.c = c_new;
      x = h_new;
    }
    off += l.param_count();
  }
  res.output = std::move(x);
  return res;
}

BackwardOut backward(const NetSpec& spec, std::span<const double> params,
                     const Tape& tape, std::span<const double> out_grad,
                     const RecurrentState* state_grad_in,
                     std::span<double> param_grads) {
  if (tape.layers.size() != spec.layers.size())
    throw std::invalid_argument("backward: tape does not match spec");
  if (param_grads.size() != spec.param_count())
    throw std::invalid_argument("backward: gradient buffer size mismatch");

  std::vector<double> dx(out_grad.begin(), out_grad.end());
  BackwardOut res;

  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& l = spec.layers[li];
    const auto& lt = tape.layers[li];
    const std::size_t off = spec.layer_offset(li);

    if (l.kind == LayerSpec::Kind::Dense) {
      const double* w = params.data() + off;
      double* gw = param_grads.data() + off;
      double* gb = gw + static_cast<std::size_t>(l.out) * l.in;
      std::vector<double> din(l.in, 0.0);
      for (int o = 0; o < l.out; ++o) {
        const double d = dx[o] * act_grad(l.act, lt.pre[o], lt.out[o]);
        const double* row = w + static_cast<std::size_t>(o) * l.in;
        double* grow = gw + static_cast<std::size_t>(o) * l.in;
        gb[o] += d;
        for (int i = 0; i < l.in; ++i) {
          grow[i] += d * lt.input[i];
          din[i] += d * row[i];
        }
      }
      dx = std::move(din);
    } else {
      const int H = l.out;
      const int I = l.in;
      const double* wih = params.data() + off;
      const double* whh = wih + static_cast<std::size_t>(4 * H) * I;
      double* gih = param_grads.data() + off;
      double* ghh = gih + static_cast<std::size_t>(4 * H) * I;
      double* gb = ghh + static_cast<std::size_t>(4 * H) * H;

      // dh = grad from later layers of this step + grad from the next step
      std::vector<double> dh = dx;
      std::vector<double> dc(H, 0.0);
      if (state_grad_in && !state_grad_in->h.empty()) {
        for (int j = 0; j < H; ++j) {
          dh[j] += state_grad_in->h[j];
          dc[j] = state_grad_in->c[j];
        }
      }

      std::vector<double> dpre(4 * H);
      std::vector<double> dc_prev(H), dh_prev(H, 0.0), din(I, 0.0);
      for (int j = 0; j < H; ++j) {
        const double ig = lt.gates[j];
        const double fg = lt.gates[H + j];
        const double gg = lt.gates[2 * H + j];
        const double og = lt.gates[3 * H + j];
        const double tc = lt.tanh_c[j];
        const double dcj = dc[j] + dh[j] * og * (1.0 - tc * tc);
        const double dog = dh[j] * tc;
        const double dig = dcj * gg;
        const double dfg = dcj * lt.c_prev[j];
        const double dgg = dcj * ig;
        dc_prev[j] = dcj * fg;
        dpre[j] = dig * ig * (1.0 - ig);
        dpre[H + j] = dfg * fg * (1.0 - fg);
        dpre[2 * H + j] = dgg * (1.0 - gg * gg);
        dpre[3 * H + j] = dog * og * (1.0 - og);
      }
      for (int g = 0; g < 4 * H; ++g) {
        const double d = dpre[g];
        const double* ri = wih + static_cast<std::size_t>(g) * I;
        const double* rh = whh + static_cast<std::size_t>(g) * H;
        double* gri = gih + static_cast<std::size_t>(g) * I;
        double* grh = ghh + static_cast<std::size_t>(g) * H;
        gb[g] += d;
        for (int i = 0; i < I; ++i) {
          gri[i] += d * lt.input[i];
          din[i] += d * ri[i];
        }
        for (int i = 0; i < H; ++i) {
          grh[i] += d * lt.h_prev[i];
          dh_prev[i] += d * rh[i];
        }
      }
      res.state_grad.h = std::move(dh_prev);
      res.state_grad.c = std::move(dc_prev);
      dx = std::move(din);
    }
  }
  res.input_grad = std::move(dx);
  return res;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  check_finite(grads, "gradient");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double finite_diff_check(const NetSpec& spec, std::span<const double> params,
                         std::span<const double> input,
                         const RecurrentState* state, const LossFn& loss,
                         double h, std::size_t max_coords, std::uint64_t seed) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: h must be positive");
  const std::size_t n = spec.param_count();
  if (n == 0) return 0.0;

  Tape tape;
  const auto fwd = forward(spec, params, input, state, &tape);
  const auto [l0, dout] = loss(fwd.output);
  (void)l0;
  std::vector<double> analytic(n, 0.0);
  backward(spec, params, tape, dout, nullptr, analytic);

  std::vector<std::size_t> coords;
  if (n <= max_coords) {
    coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
  } else {
    Rng rng(splitmix64(seed ^ 0xfdc5ULL));
    coords.resize(max_coords);
    for (auto& c : coords) c = rng.integer(n);
  }

  std::vector<double> p(params.begin(), params.end());
  double max_rel = 0.0;
  for (std::size_t c : coords) {
    const double orig = p[c];
    p[c] = orig + h;
    const double lp = loss(forward(spec, p, input, state).output).first;
    p[c] = orig - h;
    const double lm = loss(forward(spec, p, input, state).output).first;
    p[c] = orig;
    const double numeric = (lp - lm) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[c]), 1e-8});
    max_rel = std::max(max_rel, std::abs(numeric - analytic[c]) / denom);
  }
  return max_rel;
}

void init_params(const NetSpec& spec, Rng& rng, std::span<double> out) {
  if (out.size() != spec.param_count())
    throw std::invalid_argument("init_params: buffer size mismatch");
  std::size_t off = 0;
  for (const auto& l : spec.layers) {
    const std::size_t n = l.param_count();
    const double bound = 1.0 / std::sqrt(static_cast<double>(
                                  l.kind == LayerSpec::Kind::Lstm ? l.in + l.out : l.in));
    for (std::size_t i = 0; i < n; ++i) out[off + i] = rng.uniform(-bound, bound);
    off += n;
  }
}

}  // namespace autophoto::net

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <tuple>
#include <vector>

#include "softkd/error.hpp"
#include "softkd/simplex.hpp"

namespace softkd {

// Small dense feed-forward classifier: tanh hidden layers, softmax output,
// and a per-weight binary mask for pruning. Masked weights are exactly zero
// and stay zero through every update. Biases are never masked.
struct TinyNet {
  std::vector<int> sizes;                  // [D, H1, ..., C]
  std::vector<std::vector<double>> w;      // w[l][r * sizes[l] + c]
  std::vector<std::vector<double>> b;      // b[l][r]
  std::vector<std::vector<std::uint8_t>> mask;  // 1 = active

  static TinyNet init(const std::vector<int>& sizes, std::uint64_t seed) {
    if (sizes.size() < 2) fail(errc::bad_params, "need at least input and output layers");
    for (int s : sizes)
      if (s < 1) fail(errc::bad_params, "layer sizes must be positive");
    TinyNet net;
    net.sizes = sizes;
    std::mt19937_64 rng(mix_seed(seed, 0xf00d));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int in = sizes[l], out = sizes[l + 1];
      // First layer sees raw task inputs (norm ~3-4); the extra shrink keeps
      // initial tanh pre-activations out of saturation.
      const double scale = (l == 0 ? 1.0 / 3.0 : 1.0) / std::sqrt(static_cast<double>(in));
      std::vector<double> wl(static_cast<std::size_t>(in) * out);
      for (auto& x : wl) x = scale * normal(rng);
      net.w.push_back(std::move(wl));
      net.b.emplace_back(out, 0.0);
      net.mask.emplace_back(static_cast<std::size_t>(in) * out, 1);
    }
    return net;
  }

  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
  std::size_t layer_count() const { return w.size(); }

  std::size_t weight_count() const {
    std::size_t n = 0;
    for (const auto& wl : w) n += wl.size();
    return n;
  }

  std::size_t masked_count() const {
    std::size_t n = 0;
    for (const auto& ml : mask)
      for (auto m : ml)
        if (!m) ++n;
    return n;
  }

  double sparsity() const {
    return static_cast<double>(masked_count()) / static_cast<double>(weight_count());
  }

  bool mask_invariant_holds() const {
    for (std::size_t l = 0; l < w.size(); ++l)
      for (std::size_t i = 0; i < w[l].size(); ++i)
        if (!mask[l][i] && w[l][i] != 0.0) return false;
    return true;
  }
};

// Per-pass scratch buffers; reused across samples so training loops do not
// allocate.
struct NetWorkspace {
  std::vector<std::vector<double>> act;    // act[0] = input, act[L] = output probs
  std::vector<std::vector<double>> delta;  // per-layer backprop errors

  void resize(const TinyNet& net) {
    act.resize(net.sizes.size());
    for (std::size_t l = 0; l < net.sizes.size(); ++l) act[l].resize(net.sizes[l]);
    delta.resize(net.sizes.size());
    for (std::size_t l = 1; l < net.sizes.size(); ++l) delta[l].resize(net.sizes[l]);
  }
};

// Forward pass into the workspace; returns the output probabilities. The
// final layer is a max-subtracted softmax over the logits.
inline const std::vector<double>& forward_raw(const TinyNet& net, const std::vector<double>& x,
                                              NetWorkspace& ws) {
  if (static_cast<int>(x.size()) != net.input_dim()) fail(errc::dim_mismatch, "input size mismatch");
  ws.act[0] = x;
  const std::size_t L = net.layer_count();
  for (std::size_t l = 0; l < L; ++l) {
    const int in = net.sizes[l], out = net.sizes[l + 1];
    const auto& a = ws.act[l];
    auto& z = ws.act[l + 1];
    for (int r = 0; r < out; ++r) {
      double s = net.b[l][r];
      const double* wr = net.w[l].data() + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) s += wr[c] * a[c];
      z[r] = s;
    }
    if (l + 1 < L) {
      for (auto& v : z) v = std::tanh(v);
    } else {
      double m = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (auto& v : z) {
        v = std::exp(v - m);
        sum += v;
      }
      for (auto& v : z) v /= sum;
    }
  }
  return ws.act[L];
}

inline ProbDist forward(const TinyNet& net, const std::vector<double>& x) {
  NetWorkspace ws;
  ws.resize(net);
  return ProbDist::from_positive(forward_raw(net, x, ws));
}

struct NetGrad {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  void resize_like(const TinyNet& net) {
    w.resize(net.w.size());
    b.resize(net.b.size());
    for (std::size_t l = 0; l < net.w.size(); ++l) {
      w[l].assign(net.w[l].size(), 0.0);
      b[l].assign(net.b[l].size(), 0.0);
    }
  }

  void zero() {
    for (auto& wl : w) std::fill(wl.begin(), wl.end(), 0.0);
    for (auto& bl : b) std::fill(bl.begin(), bl.end(), 0.0);
  }

  double l2_norm() const {
    double s = 0.0;
    for (const auto& wl : w)
      for (double x : wl) s += x * x;
    for (const auto& bl : b)
      for (double x : bl) s += x * x;
    return std::sqrt(s);
  }
};

namespace detail {

// Propagates ws.delta[L] (a gradient at the logits) back through the net,
// accumulating parameter gradients. Masked weight slots get zero gradient.
inline void backprop_from_logits(const TinyNet& net, NetWorkspace& ws, NetGrad& grad) {
  const std::size_t L = net.layer_count();
  for (std::size_t l = L; l-- > 0;) {
    const int in = net.sizes[l], out = net.sizes[l + 1];
    const auto& a = ws.act[l];
    const auto& d = ws.delta[l + 1];
    for (int r = 0; r < out; ++r) {
      grad.b[l][r] += d[r];
      double* gr = grad.w[l].data() + static_cast<std::size_t>(r) * in;
      const std::uint8_t* mr = net.mask[l].data() + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c)
        if (mr[c]) gr[c] += d[r] * a[c];
    }
    if (l > 0) {
      auto& dprev = ws.delta[l];
      for (int c = 0; c < in; ++c) {
        double s = 0.0;
        for (int r = 0; r < out; ++r) s += net.w[l][static_cast<std::size_t>(r) * in + c] * d[r];
        dprev[c] = s * (1.0 - a[c] * a[c]);  // tanh'
      }
    }
  }
}

}  // namespace detail

// Cross-entropy against a soft target: loss = -sum_c q_c ln s_c. Accumulates
// parameter gradients into `grad` and returns the per-sample loss. Assumes q
// sums to 1, which makes the logit delta the usual softmax shortcut s - q.
inline double backward_soft_ce(const TinyNet& net, const std::vector<double>& x,
                               const std::vector<double>& q, NetWorkspace& ws, NetGrad& grad) {
  const auto& probs = forward_raw(net, x, ws);
  const std::size_t L = net.layer_count();
  const int C = net.output_dim();
  double loss = 0.0;
  for (int c = 0; c < C; ++c) {
    if (q[c] > 0.0) loss -= q[c] * std::log(std::max(probs[c], 1e-300));
    ws.delta[L][c] = probs[c] - q[c];
  }
  detail::backprop_from_logits(net, ws, grad);
  return loss;
}

// Gradient of one output probability wrt the parameters; the softmax
// jacobian gives the logit delta dp_cls/dz_r = p_cls * (1[r==cls] - p_r).
inline void backward_output_prob(const TinyNet& net, const std::vector<double>& x, int cls,
                                 NetWorkspace& ws, NetGrad& grad) {
  const auto& probs = forward_raw(net, x, ws);
  const std::size_t L = net.layer_count();
  const int C = net.output_dim();
  for (int r = 0; r < C; ++r) ws.delta[L][r] = probs[cls] * ((r == cls ? 1.0 : 0.0) - probs[r]);
  detail::backprop_from_logits(net, ws, grad);
}

// One SGD step with the averaged batch gradient; masked weights stay zero.
inline void sgd_step(TinyNet& net, const NetGrad& grad, double eta, int batch) {
  const double scale = eta / static_cast<double>(batch);
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    for (std::size_t i = 0; i < net.w[l].size(); ++i)
      if (net.mask[l][i]) net.w[l][i] -= scale * grad.w[l][i];
    for (std::size_t r = 0; r < net.b[l].size(); ++r) net.b[l][r] -= scale * grad.b[l][r];
  }
}

inline double theta_l2_distance(const TinyNet& a, const TinyNet& b) {
  double s = 0.0;
  for (std::size_t l = 0; l < a.w.size(); ++l) {
    for (std::size_t i = 0; i < a.w[l].size(); ++i) {
      const double d = a.w[l][i] - b.w[l][i];
      s += d * d;
    }
    for (std::size_t r = 0; r < a.b[l].size(); ++r) {
      const double d = a.b[l][r] - b.b[l][r];
      s += d * d;
    }
  }
  return std::sqrt(s);
}

// Global magnitude pruning to total sparsity rho: among active weights, mask
// the smallest by |w| until masked/total = rho (rounded to one weight's
// granularity). Ties break by (layer, index) order. Returns a new net.
inline TinyNet prune(const TinyNet& net, double rho) {
  if (!(rho >= 0.0) || rho >= 1.0) fail(errc::bad_rho, "rho must lie in [0, 1)");
  const std::size_t total = net.weight_count();
  const std::size_t current = net.masked_count();
  const auto target = static_cast<std::size_t>(std::llround(rho * static_cast<double>(total)));
  if (target < current) {
    if (rho < static_cast<double>(current) / static_cast<double>(total) - 0.5 / static_cast<double>(total))
      fail(errc::bad_rho, "rho below current sparsity");
    return net;
  }
  TinyNet out = net;
  if (target == current) return out;

  struct Item {
    double mag;
    std::size_t layer, idx;
  };
  std::vector<Item> active;
  active.reserve(total - current);
  for (std::size_t l = 0; l < net.w.size(); ++l)
    for (std::size_t i = 0; i < net.w[l].size(); ++i)
      if (net.mask[l][i]) active.push_back({std::abs(net.w[l][i]), l, i});
  std::sort(active.begin(), active.end(), [](const Item& a, const Item& b) {
    return std::tie(a.mag, a.layer, a.idx) < std::tie(b.mag, b.layer, b.idx);
  });
  for (std::size_t k = 0; k < target - current; ++k) {
    out.mask[active[k].layer][active[k].idx] = 0;
    out.w[active[k].layer][active[k].idx] = 0.0;
  }
  return out;
}

}  // namespace softkd

#ifndef DEBENCH_NN_ADAM_HPP_
#define DEBENCH_NN_ADAM_HPP_

#include <cmath>
#include <string>

#include "debench/nn/policy.hpp"

namespace debench::nn {

constexpr double kGradClip = 0.5;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <typename S>
struct AdamState {
  ParamMap<S> m;
  ParamMap<S> v;
  long t = 0;

  static AdamState init(const ParamMap<S>& params) {
    AdamState s;
    for (const auto& [name, value] : params) {
      s.m[name] = Mat<S>::Zero(value.rows(), value.cols());
      s.v[name] = Mat<S>::Zero(value.rows(), value.cols());
    }
    return s;
  }
};

// Global L2 norm across every tensor in the map.
template <typename S>
S global_norm(const ParamMap<S>& grads) {
  S sq = S(0);
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

// One Adam step with global-norm clipping. Gradients are validated first:
// any non-finite entry aborts the step by throwing NonFiniteGradient, leaving
// params and state untouched. Missing or extra gradient tensors are an error.
template <typename S>
void optimizer_step(ParamMap<S>& params, const ParamMap<S>& grads, AdamState<S>& opt,
                    S lr, S clip = S(kGradClip)) {
  if (grads.size() != params.size())
    throw ShapeMismatch("optimizer_step: gradient/parameter tensor sets differ");
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end())
      throw ShapeMismatch("optimizer_step: gradient for unknown tensor " + name);
    if (g.rows() != it->second.rows() || g.cols() != it->second.cols())
      throw ShapeMismatch("optimizer_step: gradient shape mismatch for " + name);
    if (!g.allFinite()) throw NonFiniteGradient("non-finite gradient in " + name);
  }

  const S norm = global_norm(grads);
  const S scale = (clip > S(0) && norm > clip) ? clip / norm : S(1);

  opt.t += 1;
  const S b1t = S(1) - std::pow(S(kAdamBeta1), S(opt.t));
  const S b2t = S(1) - std::pow(S(kAdamBeta2), S(opt.t));
  for (auto& [name, p] : params) {
    const Mat<S> g = grads.at(name) * scale;
    Mat<S>& m = opt.m[name];
    Mat<S>& v = opt.v[name];
    m = S(kAdamBeta1) * m + (S(1) - S(kAdamBeta1)) * g;
    v = S(kAdamBeta2) * v + (S(1) - S(kAdamBeta2)) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / b1t) / ((v.array() / b2t).sqrt() + S(kAdamEps));
  }
}

}  // namespace debench::nn

#endif  // DEBENCH_NN_ADAM_HPP_

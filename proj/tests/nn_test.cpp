#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "debench/nn/adam.hpp"
#include "debench/nn/checkpoint.hpp"
#include "debench/nn/graph.hpp"
#include "debench/nn/policy.hpp"

using namespace debench;
using namespace debench::nn;

namespace {

template <typename S>
Mat<S> random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, float lo = -1.0f,
                  float hi = 1.0f) {
  Mat<S> m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = static_cast<S>(rng.uniform(lo, hi));
  return m;
}

// Independent dense convolution: x (C, H*W) pixel-major, w (Cout, K*K*C) with
// row index (kr*K + kc)*C + ch, zero padding.
template <typename S>
Mat<S> direct_conv(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b, int H, int W,
                   int K, int stride, int pad) {
  const int C = static_cast<int>(x.rows());
  const int Ho = (H + 2 * pad - K) / stride + 1;
  const int Wo = (W + 2 * pad - K) / stride + 1;
  Mat<S> y = Mat<S>::Zero(w.rows(), static_cast<Eigen::Index>(Ho) * Wo);
  for (Eigen::Index co_ch = 0; co_ch < w.rows(); ++co_ch)
    for (int ro = 0; ro < Ho; ++ro)
      for (int co = 0; co < Wo; ++co) {
        S acc = b(co_ch, 0);
        for (int kr = 0; kr < K; ++kr)
          for (int kc = 0; kc < K; ++kc) {
            const int r = ro * stride - pad + kr;
            const int c = co * stride - pad + kc;
            if (r < 0 || r >= H || c < 0 || c >= W) continue;
            for (int ch = 0; ch < C; ++ch)
              acc += w(co_ch, (kr * K + kc) * C + ch) * x(ch, r * W + c);
          }
        y(co_ch, ro * Wo + co) = acc;
      }
  return y;
}

// Synthetic scalar objective shaped like an actor-critic loss so that every
// graph op the trainer relies on sits on the tape.
struct FdProblem {
  PolicyConfig cfg;
  std::vector<SamplePlanes<double>> planes;
  Mat<double> vec;      // (vec_dim, B)
  Mat<double> udraws;   // (action_dim, B)
  Mat<double> weights;  // (1, B)

  static FdProblem make(const PolicyConfig& cfg, int batch, std::uint64_t seed) {
    FdProblem p;
    p.cfg = cfg;
    Rng rng(seed);
    const Eigen::Index px = static_cast<Eigen::Index>(cfg.image_size) * cfg.image_size;
    for (int b = 0; b < batch; ++b) {
      SamplePlanes<double> cams;
      for (int c = 0; c < cfg.cameras; ++c)
        cams.push_back(random_mat<double>(cfg.in_channels, px, rng, 0.0f, 1.0f));
      p.planes.push_back(std::move(cams));
    }
    p.vec = random_mat<double>(cfg.vec_dim(), batch, rng);
    p.udraws = random_mat<double>(cfg.action_dim, batch, rng);
    p.weights = random_mat<double>(1, batch, rng);
    return p;
  }

  double loss(const ParamMap<double>& params, ParamMap<double>* grads = nullptr) const {
    Graph<double> g;
    const auto leaves = make_leaves(g, params);
    const int vec_id = g.leaf(vec);
    const auto pol = policy_graph(g, leaves, cfg, planes, vec_id);
    const int u = g.leaf(udraws);
    const int diff = g.sub(u, pol.mean);
    const int inv_sigma = g.exp(g.scale(pol.log_std, -1.0));
    const int z = g.mul_colvec(diff, inv_sigma);
    const int per = g.colwise_sum(g.mul(z, z));
    const int lp_term = g.sum(g.mul(per, g.leaf(weights)));
    const int v_term = g.scale(g.sum(g.mul(pol.value, pol.value)), 0.5);
    const int m_term = g.sum(g.tanh(pol.mean));
    const int ls_term = g.sum(g.log(g.add_scalar(g.exp(pol.log_std), 1.0)));
    const int loss_id = g.add(g.add(lp_term, v_term), g.add(m_term, ls_term));
    if (grads) {
      g.backward(loss_id);
      for (const auto& [name, id] : leaves.at) (*grads)[name] = g.grad(id);
    }
    return g.val(loss_id)(0, 0);
  }
};

void check_fd(const FdProblem& p, std::uint64_t probe_seed) {
  Rng init_rng(11);
  auto params = init_params<double>(p.cfg, init_rng);
  ParamMap<double> grads;
  p.loss(params, &grads);

  const double eps = 1e-3;
  Rng probe(probe_seed);
  double worst = 0.0;
  int checked = 0, skipped = 0;
  const auto central = [&](Mat<double>& t, Eigen::Index r, Eigen::Index c, double h) {
    const double orig = t(r, c);
    t(r, c) = orig + h;
    const double hi = p.loss(params);
    t(r, c) = orig - h;
    const double lo = p.loss(params);
    t(r, c) = orig;
    return (hi - lo) / (2 * h);
  };
  for (auto& [name, t] : params) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> picks;
    if (t.size() <= 32) {
      for (Eigen::Index c = 0; c < t.cols(); ++c)
        for (Eigen::Index r = 0; r < t.rows(); ++r) picks.emplace_back(r, c);
    } else {
      for (int k = 0; k < 8; ++k)
        picks.emplace_back(static_cast<Eigen::Index>(probe.uniform_int(static_cast<int>(t.rows()))),
                           static_cast<Eigen::Index>(probe.uniform_int(static_cast<int>(t.cols()))));
    }
    for (auto [r, c] : picks) {
      const double fd = central(t, r, c, eps);
      // A ReLU kink inside the probe interval makes the finite difference
      // itself unreliable; detect that by comparing against a half-step
      // estimate (they agree to O(eps^2) on smooth segments) and skip.
      const double fd2 = central(t, r, c, eps / 2);
      if (std::abs(fd - fd2) > 1e-3 * std::max({1e-6, std::abs(fd), std::abs(fd2)})) {
        ++skipped;
        continue;
      }
      ++checked;
      const double ad = grads.at(name)(r, c);
      // Richardson extrapolation of the two step sizes cancels the O(eps^2)
      // truncation bias, which otherwise dominates for small gradients; the
      // absolute floor covers gradients at the truncation noise scale.
      const auto agrees = [&](double est) {
        const double rel =
            std::abs(est - ad) / std::max({1e-6, std::abs(est), std::abs(ad)});
        return rel < 1e-4 || std::abs(est - ad) < 1e-7;
      };
      double est = (4 * fd2 - fd) / 3;
      if (!agrees(est)) {
        // A slope kink just inside the probe interval can slip past the
        // consistency gate; re-estimate on a smaller, kink-free interval.
        const double fd3 = central(t, r, c, eps / 8);
        const double fd4 = central(t, r, c, eps / 16);
        est = (4 * fd4 - fd3) / 3;
      }
      worst = std::max(worst, std::abs(est - ad));
      CAPTURE(name);
      CAPTURE(r);
      CAPTURE(c);
      CHECK(agrees(est));
    }
  }
  // The fixtures must be overwhelmingly probeable, or the check proves little.
  CHECK(checked >= 100);
  CHECK(skipped * 10 <= checked);
  MESSAGE("probes: ", checked, " skipped: ", skipped, " worst abs err: ", worst);
}

PolicyConfig small_cfg() {
  PolicyConfig cfg;
  cfg.image_size = 8;
  cfg.in_channels = 2;
  return cfg;
}

codec::Message zero_message(const PolicyConfig& cfg) {
  codec::Message msg;
  msg.executor_id = "lift";
  msg.planes.resize(cfg.cameras);
  for (auto& cam : msg.planes)
    for (int i = 0; i < cfg.in_channels; ++i)
      cam.push_back(Plane::Zero(cfg.image_size, cfg.image_size));
  msg.proprio.setZero();
  return msg;
}

}  // namespace

TEST_CASE("conv2d matches a direct convolution") {
  Rng rng(3);
  const int H = 5, W = 5, C = 2, K = 3;
  const auto x = random_mat<double>(C, H * W, rng);
  const auto w = random_mat<double>(4, K * K * C, rng);
  const auto b = random_mat<double>(4, 1, rng);

  for (int stride : {1, 2}) {
    Graph<double> g;
    const int y = conv2d(g, g.leaf(x), g.leaf(w), g.leaf(b), H, W, K, stride, 1);
    const auto want = direct_conv(x, w, b, H, W, K, stride, 1);
    REQUIRE(g.val(y).rows() == want.rows());
    REQUIRE(g.val(y).cols() == want.cols());
    CHECK((g.val(y) - want).cwiseAbs().maxCoeff() < 1e-12);
  }

  // 1x1 stride-2 (the skip path) against the same oracle.
  const auto w1 = random_mat<double>(3, C, rng);
  const auto b1 = random_mat<double>(3, 1, rng);
  Graph<double> g;
  const int y = conv2d(g, g.leaf(x), g.leaf(w1), g.leaf(b1), H, W, 1, 2, 0);
  const auto want = direct_conv(x, w1, b1, H, W, 1, 2, 0);
  CHECK((g.val(y) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("full-network gradients match central finite differences") {
  check_fd(FdProblem::make(small_cfg(), 3, 21), 99);
}

TEST_CASE("gradients also match with two cameras, flattening and extra inputs") {
  PolicyConfig cfg;
  cfg.image_size = 8;
  cfg.cameras = 2;
  cfg.in_channels = 3;
  cfg.extra_dim = 2;
  cfg.widths = {8, 8, 8};
  cfg.embed_dim = 4;
  cfg.mlp_width = 16;
  cfg.flatten = true;
  check_fd(FdProblem::make(cfg, 2, 22), 100);
}

TEST_CASE("pooled encoder output differentiates back to a single input pixel") {
  PolicyConfig cfg = small_cfg();
  Rng rng(5);
  auto params = init_params<double>(cfg, rng);
  const Eigen::Index px = static_cast<Eigen::Index>(cfg.image_size) * cfg.image_size;
  Mat<double> x = random_mat<double>(cfg.in_channels, px, rng, 0.0f, 1.0f);

  const auto run = [&](const Mat<double>& input, Mat<double>* dx) {
    Graph<double> g;
    const auto leaves = make_leaves(g, params);
    const int xid = g.leaf(input);
    const int out = g.sum(encoder_graph(g, leaves, cfg, xid).pooled);
    if (dx) {
      g.backward(out);
      *dx = g.grad(xid);
    }
    return g.val(out)(0, 0);
  };

  Mat<double> dx;
  run(x, &dx);
  const double eps = 1e-3;
  Rng probe(6);
  for (int k = 0; k < 12; ++k) {
    const Eigen::Index r = probe.uniform_int(static_cast<int>(x.rows()));
    const Eigen::Index c = probe.uniform_int(static_cast<int>(x.cols()));
    const double orig = x(r, c);
    x(r, c) = orig + eps;
    const double hi = run(x, nullptr);
    x(r, c) = orig - eps;
    const double lo = run(x, nullptr);
    x(r, c) = orig;
    const double fd = (hi - lo) / (2 * eps);
    CHECK(std::abs(fd - dx(r, c)) / std::max({1e-6, std::abs(fd), std::abs(dx(r, c))}) <
          1e-4);
  }
}

TEST_CASE("zero parameters and zero input propagate to exactly zero outputs") {
  PolicyConfig cfg;  // default 32x32
  const auto params = zero_params<float>(cfg);

  std::vector<Plane> zplanes(cfg.in_channels, Plane::Zero(32, 32));
  std::vector<const Plane*> ptrs;
  for (const auto& p : zplanes) ptrs.push_back(&p);
  const auto enc = encoder_forward(ptrs, params, cfg);
  CHECK(enc.embedding.rows() == cfg.embed_dim);
  CHECK(enc.embedding.cols() == 16);  // 4x4 after three halvings of 32
  CHECK(enc.embedding.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(enc.pooled.size() == cfg.embed_dim);

  const auto out = executor_forward(zero_message(cfg), params, cfg);
  CHECK(out.mean.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(out.value == 0.0f);
}

TEST_CASE("spatial reduction and feature sizes follow the config") {
  PolicyConfig cfg;
  CHECK(cfg.spatial_out() == 4);
  CHECK(cfg.feature_dim() == 8);
  cfg.flatten = true;
  CHECK(cfg.feature_dim() == 8 * 16);
  cfg.image_size = 8;
  CHECK(cfg.spatial_out() == 1);
  cfg.image_size = 48;
  CHECK(cfg.spatial_out() == 6);
}

TEST_CASE("forward passes are pure and deterministic") {
  PolicyConfig cfg = small_cfg();
  Rng rng(17);
  const auto params = init_params<float>(cfg, rng);
  const auto before = params;

  auto msg = zero_message(cfg);
  Rng noise(88);
  for (auto& cam : msg.planes)
    for (auto& plane : cam)
      for (int r = 0; r < plane.rows(); ++r)
        for (int c = 0; c < plane.cols(); ++c) plane(r, c) = noise.uniform();
  msg.proprio << 0.25f, -0.5f, 1.0f, 0.0f;

  const auto a = executor_forward(msg, params, cfg);
  const auto b = executor_forward(msg, params, cfg);
  CHECK(a.mean == b.mean);
  CHECK(a.log_std == b.log_std);
  CHECK(a.value == b.value);
  for (const auto& [name, t] : params)
    CHECK((t.array() == before.at(name).array()).all());

  // Bounded head outputs at init on arbitrary in-range inputs.
  CHECK(a.mean.cwiseAbs().maxCoeff() < 10.0f);
  CHECK(std::abs(a.value) < 10.0f);
  CHECK(a.log_std.minCoeff() >= kLogStdMin);
  CHECK(a.log_std.maxCoeff() <= kLogStdMax);
}

TEST_CASE("batched policy evaluation matches per-sample evaluation") {
  PolicyConfig cfg = small_cfg();
  Rng rng(23);
  const auto params = init_params<double>(cfg, rng);
  const auto prob = FdProblem::make(cfg, 3, 31);

  Graph<double> g;
  const auto leaves = make_leaves(g, params);
  const auto pol = policy_graph(g, leaves, cfg, prob.planes, g.leaf(prob.vec));

  for (int b = 0; b < 3; ++b) {
    Graph<double> g1;
    const auto l1 = make_leaves(g1, params);
    const auto p1 = policy_graph(g1, l1, cfg, {prob.planes[b]},
                                 g1.leaf(Mat<double>(prob.vec.col(b))));
    CHECK((g.val(pol.mean).col(b) - g1.val(p1.mean).col(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.val(pol.value).col(b) - g1.val(p1.value).col(0)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("sampling: squash identity, determinism, greedy mode") {
  PolicyOutput out;
  out.mean = Eigen::Vector3f(0.3f, -1.2f, 0.0f);
  out.log_std = Eigen::Vector3f::Constant(-0.5f);
  out.value = 0.0f;

  Rng r1(40), r2(40);
  const auto s1 = sample_action(out, r1);
  const auto s2 = sample_action(out, r2);
  CHECK(s1.action == s2.action);
  CHECK(s1.log_prob == s2.log_prob);
  for (int i = 0; i < 3; ++i)
    CHECK(s1.action[i] == doctest::Approx(std::tanh(s1.presquash[i])).epsilon(1e-6));

  Rng g1(7), g2(7);
  const auto sg = sample_action(out, g1, /*greedy=*/true);
  CHECK(g1 == g2);  // greedy consumes no randomness
  for (int i = 0; i < 3; ++i) CHECK(sg.action[i] == std::tanh(out.mean[i]));
}

TEST_CASE("log-probabilities match direct density evaluation and peak at the mode") {
  PolicyOutput out;
  out.mean = Eigen::Vector3f(0.4f, -0.8f, 0.1f);
  out.log_std = Eigen::Vector3f::Constant(-0.5f);

  const auto oracle = [&](const Eigen::VectorXf& u) {
    double lp = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double sigma = std::exp(static_cast<double>(out.log_std[i]));
      const double d = (static_cast<double>(u[i]) - out.mean[i]) / sigma;
      lp += -0.5 * d * d - std::log(sigma * std::sqrt(2.0 * M_PI));
      const double t = std::tanh(static_cast<double>(u[i]));
      lp -= std::log(1.0 - t * t + 1e-6);
    }
    return lp;
  };

  // The squash correction shifts the density peak away from tanh(mean); find
  // the true per-dimension mode by bisecting the stationarity condition
  // (the density separates across dimensions and is concave at this sigma).
  Eigen::VectorXf mode(3);
  for (int i = 0; i < 3; ++i) {
    const double mu = out.mean[i];
    const double s2 = std::exp(2.0 * static_cast<double>(out.log_std[i]));
    const auto slope = [&](double u) {
      const double t = std::tanh(u);
      return -(u - mu) / s2 + 2.0 * t * (1.0 - t * t) / (1.0 - t * t + 1e-6);
    };
    double lo = mu - 5.0, hi = mu + 5.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0 ? lo : hi) = mid;
    }
    mode[i] = static_cast<float>(0.5 * (lo + hi));
  }
  const float at_mode = action_log_prob(out, mode);

  Rng rng(55);
  for (int k = 0; k < 1000; ++k) {
    const auto s = sample_action(out, rng);
    CHECK(std::isfinite(s.log_prob));
    CHECK(s.log_prob == doctest::Approx(oracle(s.presquash)).epsilon(2e-4));
    CHECK(s.log_prob <= at_mode + 1e-4f);
  }

  // Saturated squash stays finite thanks to the epsilon guard.
  CHECK(std::isfinite(action_log_prob(out, Eigen::Vector3f(30.0f, -30.0f, 0.0f))));
}

TEST_CASE("a floor log-std collapses sampling onto the greedy action") {
  PolicyOutput out;
  out.mean = Eigen::Vector3f(0.6f, -0.1f, 1.4f);
  out.log_std = Eigen::Vector3f::Constant(-5.0f);
  Rng rng(61);
  for (int k = 0; k < 200; ++k) {
    const auto s = sample_action(out, rng);
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(s.action[i] - std::tanh(out.mean[i])) < 0.05f);
  }
}

TEST_CASE("adam: hand-computed first step") {
  ParamMap<double> params;
  params["p"] = Mat<double>::Constant(1, 1, 1.0);
  ParamMap<double> grads;
  grads["p"] = Mat<double>::Constant(1, 1, 0.1);
  auto opt = AdamState<double>::init(params);

  optimizer_step(params, grads, opt, 0.001);
  // m = 0.01, v = 1e-5; bias-corrected: 0.1 and 0.01.
  // step = lr * 0.1 / (0.1 + 1e-8)
  const double want = 1.0 - 0.001 * 0.1 / (std::sqrt(0.01) + 1e-8);
  CHECK(params["p"](0, 0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(opt.m["p"](0, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(opt.v["p"](0, 0) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(opt.t == 1);

  optimizer_step(params, grads, opt, 0.001);
  const double m2 = 0.9 * 0.01 + 0.1 * 0.1;
  const double v2 = 0.999 * 1e-5 + 0.001 * 0.01;
  const double want2 =
      want - 0.001 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
  CHECK(params["p"](0, 0) == doctest::Approx(want2).epsilon(1e-12));
}

TEST_CASE("adam: gradients are clipped to global norm 0.5") {
  ParamMap<double> params;
  params["a"] = Mat<double>::Zero(1, 2);
  ParamMap<double> grads;
  grads["a"] = Mat<double>(1, 2);
  grads["a"] << 6.0, 8.0;  // norm 10 -> scale 0.05
  auto opt = AdamState<double>::init(params);
  optimizer_step(params, grads, opt, 0.001);
  CHECK(opt.m["a"](0, 0) == doctest::Approx(0.1 * 0.3).epsilon(1e-12));
  CHECK(opt.m["a"](0, 1) == doctest::Approx(0.1 * 0.4).epsilon(1e-12));

  // Norm exactly at the clip is left alone.
  ParamMap<double> p2{{"a", Mat<double>::Zero(1, 1)}};
  ParamMap<double> g2{{"a", Mat<double>::Constant(1, 1, 0.5)}};
  auto o2 = AdamState<double>::init(p2);
  optimizer_step(p2, g2, o2, 0.001);
  CHECK(o2.m["a"](0, 0) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("adam: zero gradients leave parameters bitwise unchanged") {
  PolicyConfig cfg = small_cfg();
  Rng rng(9);
  auto params = init_params<float>(cfg, rng);
  const auto before = params;
  auto grads = zero_params<float>(cfg);
  auto opt = AdamState<float>::init(params);
  optimizer_step(params, grads, opt, 3e-4f);
  for (const auto& [name, t] : params)
    CHECK((t.array() == before.at(name).array()).all());
}

TEST_CASE("adam: non-finite gradients abort the step without side effects") {
  ParamMap<float> params{{"a", Mat<float>::Constant(2, 2, 1.0f)}};
  ParamMap<float> grads{{"a", Mat<float>::Constant(2, 2, 0.1f)}};
  grads["a"](1, 1) = std::numeric_limits<float>::quiet_NaN();
  auto opt = AdamState<float>::init(params);
  CHECK_THROWS_AS(optimizer_step(params, grads, opt, 3e-4f), NonFiniteGradient);
  CHECK((params["a"].array() == 1.0f).all());
  CHECK((opt.m["a"].array() == 0.0f).all());
  CHECK(opt.t == 0);

  grads["a"](1, 1) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(optimizer_step(params, grads, opt, 3e-4f), NonFiniteGradient);

  ParamMap<float> missing;
  CHECK_THROWS_AS(optimizer_step(params, missing, opt, 3e-4f), ShapeMismatch);
}

TEST_CASE("parameter init is deterministic and shaped per config") {
  PolicyConfig cfg;
  Rng r1(42), r2(42), r3(43);
  const auto a = init_params<float>(cfg, r1);
  const auto b = init_params<float>(cfg, r2);
  const auto c = init_params<float>(cfg, r3);
  REQUIRE(a.size() == b.size());
  bool any_diff = false;
  for (const auto& [name, t] : a) {
    CHECK((t.array() == b.at(name).array()).all());
    if (!(t.array() == c.at(name).array()).all()) any_diff = true;
  }
  CHECK(any_diff);

  const auto z = zero_params<float>(cfg);
  REQUIRE(z.size() == a.size());
  for (const auto& [name, t] : z) {
    REQUIRE(a.count(name) == 1);
    CHECK(t.rows() == a.at(name).rows());
    CHECK(t.cols() == a.at(name).cols());
  }

  CHECK((a.at("log_std").array() == kLogStdInit).all());
  CHECK((a.at("head.mean.b").array() == 0.0f).all());
  CHECK((a.at("enc.b0.conv1.b").array() == 0.0f).all());
  // Final policy layer is scaled down two orders of magnitude.
  const float bound = 0.01f / std::sqrt(static_cast<float>(cfg.mlp_width));
  CHECK(a.at("head.mean.w").cwiseAbs().maxCoeff() <= bound);
  CHECK(a.at("head.value.w").cwiseAbs().maxCoeff() <= 1.0f / std::sqrt(64.0f));
  CHECK(a.at("head.value.w").cwiseAbs().maxCoeff() > bound);
}

TEST_CASE("policy config round-trips through its text form") {
  PolicyConfig cfg;
  cfg.cameras = 2;
  cfg.in_channels = 3;
  cfg.extra_dim = 4;
  cfg.flatten = true;
  const auto back = PolicyConfig::deserialize(cfg.serialize());
  CHECK(back == cfg);
  CHECK_THROWS_AS(PolicyConfig::deserialize("bogus_key=1"), Error);
}

TEST_CASE("checkpoints round-trip bit-exactly and reject corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "debench_nn_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "ck.bin").string();

  PolicyConfig cfg = small_cfg();
  Rng rng(77);
  auto params = init_params<float>(cfg, rng);
  auto opt = AdamState<float>::init(params);
  ParamMap<float> grads = zero_params<float>(cfg);
  grads["head.mean.b"].setConstant(0.25f);
  optimizer_step(params, grads, opt, 3e-4f);

  Checkpoint ck;
  ck.config = cfg.serialize();
  ck.tensors = params;
  for (const auto& [name, t] : opt.m) ck.tensors["opt.m." + name] = t;
  for (const auto& [name, t] : opt.v) ck.tensors["opt.v." + name] = t;
  ck.tensors["opt.t"] = Mat<float>::Constant(1, 1, static_cast<float>(opt.t));
  save_checkpoint(path, ck);

  const auto back = load_checkpoint(path);
  CHECK(back.config == ck.config);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (const auto& [name, t] : ck.tensors) {
    REQUIRE(back.tensors.count(name) == 1);
    const auto& u = back.tensors.at(name);
    REQUIRE(u.rows() == t.rows());
    REQUIRE(u.cols() == t.cols());
    CHECK((u.array() == t.array()).all());  // bit-exact via float equality
  }
  CHECK(PolicyConfig::deserialize(back.config) == cfg);

  // Damage the stored config: hash verification must catch it.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(24);  // inside the config string
    char c;
    f.seekg(24);
    f.get(c);
    f.seekp(24);
    f.put(static_cast<char>(c ^ 0x01));
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  save_checkpoint(path, ck);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "NOTACKPT-------";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.bin").string()), Error);
}

TEST_CASE("shape validation throws instead of reading out of bounds") {
  PolicyConfig cfg = small_cfg();
  Rng rng(13);
  const auto params = init_params<float>(cfg, rng);

  auto msg = zero_message(cfg);
  msg.planes[0].pop_back();  // one plane short
  CHECK_THROWS_AS(executor_forward(msg, params, cfg), ShapeMismatch);

  auto msg2 = zero_message(cfg);
  msg2.planes.emplace_back();  // camera the config does not expect
  CHECK_THROWS_AS(executor_forward(msg2, params, cfg), ShapeMismatch);

  Graph<float> g;
  const int a = g.leaf(Mat<float>::Zero(2, 2));
  const int b = g.leaf(Mat<float>::Zero(3, 2));
  CHECK_THROWS_AS(g.add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(g.matmul(a, b), ShapeMismatch);
  CHECK_THROWS_AS(g.backward(a), ShapeMismatch);

  sim2d::Observation obs;
  obs.cameras.emplace_back(8, 8);
  obs.proprio.setZero();
  PolicyConfig bcfg = small_cfg();
  bcfg.in_channels = 3;
  bcfg.extra_dim = 2;
  Rng rng2(14);
  const auto bparams = init_params<float>(bcfg, rng2);
  CHECK_THROWS_AS(baseline_forward(obs, Eigen::VectorXf::Zero(3), bparams, bcfg),
                  ShapeMismatch);
  const auto ok = baseline_forward(obs, Eigen::VectorXf::Zero(2), bparams, bcfg);
  CHECK(std::isfinite(ok.value));
}

#ifndef DEBENCH_NN_POLICY_HPP_
#define DEBENCH_NN_POLICY_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "debench/codec.hpp"
#include "debench/common.hpp"
#include "debench/image.hpp"
#include "debench/nn/graph.hpp"
#include "debench/sim2d.hpp"

namespace debench::nn {

constexpr float kLogStdInit = -0.5f;
constexpr float kLogStdMin = -5.0f;
constexpr float kLogStdMax = 2.0f;
constexpr float kSquashEps = 1e-6f;

// Static network shape. Everything downstream (parameter shapes, checkpoint
// compatibility) is a pure function of this struct, so it round-trips through
// a key=value string whose hash is stored in checkpoints.
struct PolicyConfig {
  int image_size = 32;
  int cameras = 1;
  int in_channels = 2;   // planes per camera fed to the encoder
  int proprio_dim = 4;
  int extra_dim = 0;     // task one-hot width (baseline policies), 0 otherwise
  int action_dim = 3;
  std::array<int, 3> widths = {16, 32, 32};
  int embed_dim = 8;
  int mlp_width = 64;
  bool flatten = false;  // ablation: flatten the embedding instead of mean-pooling

  // Spatial side length after the three stride-2 blocks (ceil of /2 each).
  int spatial_out() const {
    int h = image_size;
    for (int i = 0; i < 3; ++i) h = (h - 1) / 2 + 1;
    return h;
  }
  int feature_dim() const {  // per camera
    const int s = spatial_out();
    return flatten ? embed_dim * s * s : embed_dim;
  }
  int vec_dim() const { return proprio_dim + extra_dim; }

  std::string serialize() const;
  static PolicyConfig deserialize(const std::string& text);
  bool operator==(const PolicyConfig&) const = default;
};

template <typename S>
using ParamMap = std::map<std::string, Mat<S>>;

// Fan-in-scaled uniform init, biases zero, final policy layer scaled by 0.01,
// log_std constant at kLogStdInit. Tensor creation order is fixed so a given
// rng yields the same parameters on every platform.
template <typename S>
ParamMap<S> init_params(const PolicyConfig& cfg, Rng& rng);

template <typename S>
ParamMap<S> zero_params(const PolicyConfig& cfg);

template <typename S>
ParamMap<S> cast_params(const ParamMap<float>& p);

// --- Graph builders (shared by inference wrappers and the trainer) ---------

template <typename S>
struct LeafIds {
  std::map<std::string, int> at;
  int operator()(const std::string& k) const {
    auto it = at.find(k);
    if (it == at.end()) throw Error("no parameter leaf named " + k);
    return it->second;
  }
};

template <typename S>
LeafIds<S> make_leaves(Graph<S>& g, const ParamMap<S>& params) {
  LeafIds<S> ids;
  for (const auto& [name, value] : params) ids.at[name] = g.leaf(value);
  return ids;
}

// 3x3 (or KxK) convolution as im2col + matmul; w is (C_out, K*K*C_in).
template <typename S>
int conv2d(Graph<S>& g, int x, int w, int b, int H, int W, int K, int stride, int pad) {
  const bool pointwise = K == 1 && stride == 1 && pad == 0;
  const int cols = pointwise ? x : g.im2col(x, H, W, K, stride, pad);
  return g.add_colvec(g.matmul(w, cols), b);
}

template <typename S>
struct EncoderNodes {
  int embedding;  // (embed_dim, H'*W')
  int pooled;     // (feature_dim, 1)
};

// Three stride-2 residual blocks then a 1x1 projection to embed_dim channels.
// x is one camera's plane stack as (in_channels, H*W), pixel index r*W + c.
template <typename S>
EncoderNodes<S> encoder_graph(Graph<S>& g, const LeafIds<S>& p, const PolicyConfig& cfg,
                              int x) {
  int h = cfg.image_size;
  int cur = x;
  for (int i = 0; i < 3; ++i) {
    const std::string b = "enc.b" + std::to_string(i) + ".";
    const int c1 = g.relu(conv2d(g, cur, p(b + "conv1.w"), p(b + "conv1.b"), h, h, 3, 2, 1));
    const int ho = (h - 1) / 2 + 1;
    const int c2 = conv2d(g, c1, p(b + "conv2.w"), p(b + "conv2.b"), ho, ho, 3, 1, 1);
    const int sk = conv2d(g, cur, p(b + "skip.w"), p(b + "skip.b"), h, h, 1, 2, 0);
    cur = g.relu(g.add(c2, sk));
    h = ho;
  }
  EncoderNodes<S> out;
  out.embedding = g.add_colvec(g.matmul(p("enc.embed.w"), cur), p("enc.embed.b"));
  out.pooled = cfg.flatten ? g.reshape(out.embedding, cfg.feature_dim(), 1)
                           : g.rowwise_mean(out.embedding);
  return out;
}

template <typename S>
struct PolicyNodes {
  int mean;     // (action_dim, B)
  int log_std;  // (action_dim, 1), clamped
  int value;    // (1, B)
};

// One sample's image-side input: per camera a (in_channels, H*W) plane stack.
template <typename S>
using SamplePlanes = std::vector<Mat<S>>;

// Full policy over a batch. vec is (proprio_dim + extra_dim, B) and
// planes[b][camera] are the image inputs; the encoder weights are shared
// across cameras.
template <typename S>
PolicyNodes<S> policy_graph(Graph<S>& g, const LeafIds<S>& p, const PolicyConfig& cfg,
                            const std::vector<SamplePlanes<S>>& planes, int vec) {
  if (planes.empty()) throw ShapeMismatch("policy_graph: empty batch");
  std::vector<int> feats;
  feats.reserve(planes.size());
  for (const auto& sample : planes) {
    if (static_cast<int>(sample.size()) != cfg.cameras)
      throw ShapeMismatch("policy_graph: camera count mismatch");
    int cat = -1;
    for (const auto& stack : sample) {
      if (stack.rows() != cfg.in_channels ||
          stack.cols() != static_cast<Eigen::Index>(cfg.image_size) * cfg.image_size)
        throw ShapeMismatch("policy_graph: plane stack shape mismatch");
      const int pooled = encoder_graph(g, p, cfg, g.leaf(stack)).pooled;
      cat = cat < 0 ? pooled : g.vcat(cat, pooled);
    }
    feats.push_back(cat);
  }
  const int F = g.hcat(feats);
  int cur = g.vcat(F, vec);
  for (int i = 0; i < 3; ++i) {
    const std::string l = "mlp.l" + std::to_string(i) + ".";
    cur = g.relu(g.add_colvec(g.matmul(p(l + "w"), cur), p(l + "b")));
  }
  PolicyNodes<S> out;
  out.mean = g.add_colvec(g.matmul(p("head.mean.w"), cur), p("head.mean.b"));
  out.value = g.add_colvec(g.matmul(p("head.value.w"), cur), p("head.value.b"));
  out.log_std = g.clamp(p("log_std"), S(kLogStdMin), S(kLogStdMax));
  return out;
}

// --- Input conversion -------------------------------------------------------

// Flattens (H, W) planes into a (C, H*W) stack with pixel index r*W + c.
template <typename S>
Mat<S> plane_stack(const std::vector<const Plane*>& planes) {
  if (planes.empty()) throw ShapeMismatch("plane_stack: no planes");
  const int H = static_cast<int>(planes[0]->rows());
  const int W = static_cast<int>(planes[0]->cols());
  Mat<S> out(planes.size(), static_cast<Eigen::Index>(H) * W);
  for (std::size_t c = 0; c < planes.size(); ++c) {
    if (planes[c]->rows() != H || planes[c]->cols() != W)
      throw ShapeMismatch("plane_stack: plane sizes disagree");
    for (int r = 0; r < H; ++r)
      for (int w = 0; w < W; ++w) out(c, r * W + w) = static_cast<S>((*planes[c])(r, w));
  }
  return out;
}

template <typename S>
SamplePlanes<S> message_planes(const codec::Message& msg);

template <typename S>
SamplePlanes<S> observation_planes(const sim2d::Observation& obs);

// --- Inference wrappers (float, single sample, no gradients) ---------------

struct PolicyOutput {
  Eigen::VectorXf mean;     // pre-squash action mean
  Eigen::VectorXf log_std;  // clamped to [kLogStdMin, kLogStdMax]
  float value = 0.0f;
};

struct EncoderOutput {
  Eigen::MatrixXf embedding;  // (embed_dim, H'*W')
  Eigen::VectorXf pooled;     // (feature_dim)
};

EncoderOutput encoder_forward(const std::vector<const Plane*>& planes,
                              const ParamMap<float>& params, const PolicyConfig& cfg);

// Executor policy on a channel message. The message's planes must match the
// config (cameras and planes per camera); proprio rides alongside the pooled
// features into the trunk.
PolicyOutput executor_forward(const codec::Message& msg, const ParamMap<float>& params,
                              const PolicyConfig& cfg);

// Monolithic baseline: same encoder on raw RGB, task one-hot next to proprio.
PolicyOutput baseline_forward(const sim2d::Observation& obs,
                              const Eigen::VectorXf& task_onehot,
                              const ParamMap<float>& params, const PolicyConfig& cfg);

// --- Action head ------------------------------------------------------------

struct ActionSample {
  Eigen::VectorXf action;    // tanh-squashed, in (-1, 1)
  Eigen::VectorXf presquash; // the Gaussian draw u with action = tanh(u)
  float log_prob = 0.0f;
};

// Draws from the tanh-squashed diagonal Gaussian; greedy returns tanh(mean).
ActionSample sample_action(const PolicyOutput& out, Rng& rng, bool greedy = false);

// Density of the squashed distribution at action = tanh(presquash).
float action_log_prob(const PolicyOutput& out, const Eigen::VectorXf& presquash);

// --- Template definitions ---------------------------------------------------

// Enumerates every tensor the config implies, in the order init draws them.
template <typename Fn>
void for_each_tensor(const PolicyConfig& cfg, Fn&& fn) {
  int cin = cfg.in_channels;
  for (int i = 0; i < 3; ++i) {
    const int cout = cfg.widths[static_cast<std::size_t>(i)];
    const std::string b = "enc.b" + std::to_string(i) + ".";
    fn(b + "conv1.w", cout, 9 * cin, 9 * cin);
    fn(b + "conv1.b", cout, 1, 0);
    fn(b + "conv2.w", cout, 9 * cout, 9 * cout);
    fn(b + "conv2.b", cout, 1, 0);
    fn(b + "skip.w", cout, cin, cin);
    fn(b + "skip.b", cout, 1, 0);
    cin = cout;
  }
  fn("enc.embed.w", cfg.embed_dim, cin, cin);
  fn("enc.embed.b", cfg.embed_dim, 1, 0);
  int in = cfg.cameras * cfg.feature_dim() + cfg.vec_dim();
  for (int i = 0; i < 3; ++i) {
    const std::string l = "mlp.l" + std::to_string(i) + ".";
    fn(l + "w", cfg.mlp_width, in, in);
    fn(l + "b", cfg.mlp_width, 1, 0);
    in = cfg.mlp_width;
  }
  fn("head.mean.w", cfg.action_dim, cfg.mlp_width, cfg.mlp_width);
  fn("head.mean.b", cfg.action_dim, 1, 0);
  fn("head.value.w", 1, cfg.mlp_width, cfg.mlp_width);
  fn("head.value.b", 1, 1, 0);
  fn("log_std", cfg.action_dim, 1, 0);
}

template <typename S>
ParamMap<S> init_params(const PolicyConfig& cfg, Rng& rng) {
  ParamMap<S> out;
  for_each_tensor(cfg, [&](const std::string& name, int rows, int cols, int fan_in) {
    Mat<S>& t = out[name];
    t.setZero(rows, cols);
    if (name == "log_std") {
      t.setConstant(S(kLogStdInit));
    } else if (fan_in > 0) {
      const float a = 1.0f / std::sqrt(static_cast<float>(fan_in));
      for (Eigen::Index c = 0; c < t.cols(); ++c)
        for (Eigen::Index r = 0; r < t.rows(); ++r)
          t(r, c) = static_cast<S>(rng.uniform(-a, a));
    }
  });
  out["head.mean.w"] *= S(0.01);
  return out;
}

template <typename S>
ParamMap<S> zero_params(const PolicyConfig& cfg) {
  ParamMap<S> out;
  for_each_tensor(cfg, [&](const std::string& name, int rows, int cols, int) {
    out[name].setZero(rows, cols);
  });
  return out;
}

template <typename S>
ParamMap<S> cast_params(const ParamMap<float>& p) {
  ParamMap<S> out;
  for (const auto& [name, value] : p) out[name] = value.template cast<S>();
  return out;
}

template <typename S>
SamplePlanes<S> message_planes(const codec::Message& msg) {
  SamplePlanes<S> out;
  out.reserve(msg.planes.size());
  for (const auto& cam : msg.planes) {
    std::vector<const Plane*> ptrs;
    ptrs.reserve(cam.size());
    for (const auto& plane : cam) ptrs.push_back(&plane);
    out.push_back(plane_stack<S>(ptrs));
  }
  return out;
}

template <typename S>
SamplePlanes<S> observation_planes(const sim2d::Observation& obs) {
  SamplePlanes<S> out;
  out.reserve(obs.cameras.size());
  for (const auto& img : obs.cameras)
    out.push_back(plane_stack<S>({&img.rgb[0], &img.rgb[1], &img.rgb[2]}));
  return out;
}

}  // namespace debench::nn

#endif  // DEBENCH_NN_POLICY_HPP_

#include "debench/nn/policy.hpp"

#include <cmath>
#include <sstream>

namespace debench::nn {

namespace {

constexpr float kHalfLog2Pi = 0.91893853320467274f;  // 0.5*log(2*pi)

void append(std::string& s, const char* key, const std::string& v) {
  if (!s.empty()) s += ',';
  s += key;
  s += '=';
  s += v;
}

}  // namespace

std::string PolicyConfig::serialize() const {
  std::string s;
  append(s, "image_size", std::to_string(image_size));
  append(s, "cameras", std::to_string(cameras));
  append(s, "in_channels", std::to_string(in_channels));
  append(s, "proprio_dim", std::to_string(proprio_dim));
  append(s, "extra_dim", std::to_string(extra_dim));
  append(s, "action_dim", std::to_string(action_dim));
  append(s, "widths",
         std::to_string(widths[0]) + ':' + std::to_string(widths[1]) + ':' +
             std::to_string(widths[2]));
  append(s, "embed_dim", std::to_string(embed_dim));
  append(s, "mlp_width", std::to_string(mlp_width));
  append(s, "flatten", flatten ? "1" : "0");
  return s;
}

PolicyConfig PolicyConfig::deserialize(const std::string& text) {
  PolicyConfig cfg;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("policy config: missing '=' in " + item);
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "image_size") cfg.image_size = std::stoi(val);
    else if (key == "cameras") cfg.cameras = std::stoi(val);
    else if (key == "in_channels") cfg.in_channels = std::stoi(val);
    else if (key == "proprio_dim") cfg.proprio_dim = std::stoi(val);
    else if (key == "extra_dim") cfg.extra_dim = std::stoi(val);
    else if (key == "action_dim") cfg.action_dim = std::stoi(val);
    else if (key == "widths") {
      std::stringstream ws(val);
      std::string w;
      for (auto& slot : cfg.widths) {
        if (!std::getline(ws, w, ':')) throw Error("policy config: widths wants 3 entries");
        slot = std::stoi(w);
      }
    } else if (key == "embed_dim") cfg.embed_dim = std::stoi(val);
    else if (key == "mlp_width") cfg.mlp_width = std::stoi(val);
    else if (key == "flatten") cfg.flatten = val == "1";
    else throw Error("policy config: unknown key " + key);
  }
  return cfg;
}

EncoderOutput encoder_forward(const std::vector<const Plane*>& planes,
                              const ParamMap<float>& params, const PolicyConfig& cfg) {
  if (static_cast<int>(planes.size()) != cfg.in_channels)
    throw ShapeMismatch("encoder_forward: channel count mismatch");
  Graph<float> g;
  const auto leaves = make_leaves(g, params);
  const int x = g.leaf(plane_stack<float>(planes));
  if (g.val(x).cols() != static_cast<Eigen::Index>(cfg.image_size) * cfg.image_size)
    throw ShapeMismatch("encoder_forward: image size mismatch");
  const auto enc = encoder_graph(g, leaves, cfg, x);
  EncoderOutput out;
  out.embedding = g.val(enc.embedding);
  out.pooled = g.val(enc.pooled).col(0);
  return out;
}

namespace {

PolicyOutput run_policy(const std::vector<SamplePlanes<float>>& planes,
                        const Eigen::VectorXf& vec, const ParamMap<float>& params,
                        const PolicyConfig& cfg) {
  if (vec.size() != cfg.vec_dim())
    throw ShapeMismatch("policy forward: proprio/extra width mismatch");
  Graph<float> g;
  const auto leaves = make_leaves(g, params);
  const int v = g.leaf(vec);
  const auto nodes = policy_graph(g, leaves, cfg, planes, v);
  PolicyOutput out;
  out.mean = g.val(nodes.mean).col(0);
  out.log_std = g.val(nodes.log_std).col(0);
  out.value = g.val(nodes.value)(0, 0);
  return out;
}

}  // namespace

PolicyOutput executor_forward(const codec::Message& msg, const ParamMap<float>& params,
                              const PolicyConfig& cfg) {
  if (static_cast<int>(msg.planes.size()) != cfg.cameras)
    throw ShapeMismatch("executor_forward: camera count mismatch");
  for (const auto& cam : msg.planes)
    if (static_cast<int>(cam.size()) != cfg.in_channels)
      throw ShapeMismatch("executor_forward: plane count mismatch");
  if (cfg.proprio_dim != 4 || cfg.extra_dim != 0)
    throw ShapeMismatch("executor_forward: executor configs carry proprio only");
  return run_policy({message_planes<float>(msg)}, msg.proprio, params, cfg);
}

PolicyOutput baseline_forward(const sim2d::Observation& obs,
                              const Eigen::VectorXf& task_onehot,
                              const ParamMap<float>& params, const PolicyConfig& cfg) {
  if (static_cast<int>(obs.cameras.size()) != cfg.cameras)
    throw ShapeMismatch("baseline_forward: camera count mismatch");
  if (cfg.in_channels != 3)
    throw ShapeMismatch("baseline_forward: baseline configs take 3 RGB channels");
  if (task_onehot.size() != cfg.extra_dim)
    throw ShapeMismatch("baseline_forward: task one-hot width mismatch");
  Eigen::VectorXf vec(cfg.vec_dim());
  vec.head(4) = obs.proprio;
  vec.tail(cfg.extra_dim) = task_onehot;
  return run_policy({observation_planes<float>(obs)}, vec, params, cfg);
}

ActionSample sample_action(const PolicyOutput& out, Rng& rng, bool greedy) {
  const Eigen::Index n = out.mean.size();
  ActionSample s;
  s.presquash.resize(n);
  s.action.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const float sigma = std::exp(out.log_std[i]);
    s.presquash[i] = greedy ? out.mean[i] : out.mean[i] + sigma * rng.normal();
    s.action[i] = std::tanh(s.presquash[i]);
  }
  s.log_prob = action_log_prob(out, s.presquash);
  return s;
}

float action_log_prob(const PolicyOutput& out, const Eigen::VectorXf& presquash) {
  if (presquash.size() != out.mean.size())
    throw ShapeMismatch("action_log_prob: dimension mismatch");
  float lp = 0.0f;
  for (Eigen::Index i = 0; i < presquash.size(); ++i) {
    const float sigma = std::exp(out.log_std[i]);
    const float z = (presquash[i] - out.mean[i]) / sigma;
    const float t = std::tanh(presquash[i]);
    lp += -0.5f * z * z - out.log_std[i] - kHalfLog2Pi;
    lp -= std::log(1.0f - t * t + kSquashEps);
  }
  return lp;
}

}  // namespace debench::nn

#include "debench/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "debench/dispatcher.hpp"

namespace debench::trainer {

namespace {

constexpr float kHalfLog2Pi = 0.91893853320467274f;  // 0.5 * ln(2*pi)
constexpr float kGaussEntConst = 1.4189385332046727f;  // 0.5 * (1 + ln(2*pi))
constexpr int kMaxTasks = 64;  // eval seed-block stride, see evaluate()

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

// Lossless float -> text (9 significant digits round-trip through stof).
std::string fstr(float v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

codec::ChannelConfig channel_config(const std::string& name) {
  const auto cc = codec::ChannelConfig::from_name(name);
  if (!cc) throw Error("unknown channel: " + name);
  return *cc;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::De: return "de";
    case Architecture::Baseline: return "baseline";
  }
  return "?";
}

std::optional<Architecture> architecture_from_name(std::string_view s) {
  if (s == "de") return Architecture::De;
  if (s == "baseline") return Architecture::Baseline;
  return std::nullopt;
}

std::string TrainConfig::serialize() const {
  std::ostringstream os;
  os << "architecture=" << architecture_name(architecture) << "\n";
  os << "channel=" << channel << "\n";
  os << "tasks=";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (i) os << ";";
    os << tasks[i].text();
  }
  os << "\n";
  os << "weights=";
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (i) os << ":";
    os << fstr(weights[i]);
  }
  os << "\n";
  os << "episodes=" << episodes << "\n";
  os << "workers=" << workers << "\n";
  os << "batch_episodes=" << batch_episodes << "\n";
  os << "gamma=" << fstr(gamma) << "\n";
  os << "lam=" << fstr(lam) << "\n";
  os << "lr=" << fstr(lr) << "\n";
  os << "entropy_coef=" << fstr(entropy_coef) << "\n";
  os << "value_coef=" << fstr(value_coef) << "\n";
  os << "normalize_advantages=" << (normalize_advantages ? 1 : 0) << "\n";
  os << "eval_cadence=" << eval_cadence << "\n";
  os << "eval_episodes=" << eval_episodes << "\n";
  os << "baseline_width_mult=" << fstr(baseline_width_mult) << "\n";
  os << "flatten=" << (flatten ? 1 : 0) << "\n";
  os << "seed=" << seed << "\n";
  os << "out_dir=" << out_dir << "\n";
  std::istringstream scene_is(scene.serialize());
  std::string line;
  while (std::getline(scene_is, line))
    if (!line.empty()) os << "scene." << line << "\n";
  return os.str();
}

TrainConfig TrainConfig::deserialize(const std::string& text) {
  TrainConfig cfg;
  std::string scene_text;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("bad train config line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key.rfind("scene.", 0) == 0) {
      scene_text += key.substr(6) + "=" + val + "\n";
    } else if (key == "architecture") {
      const auto a = architecture_from_name(val);
      if (!a) throw Error("unknown architecture: " + val);
      cfg.architecture = *a;
    } else if (key == "channel") {
      cfg.channel = val;
    } else if (key == "tasks") {
      cfg.tasks.clear();
      for (const auto& t : split(val, ';'))
        if (!trim(t).empty()) cfg.tasks.push_back(dispatcher::parse_task(trim(t)));
    } else if (key == "weights") {
      cfg.weights.clear();
      for (const auto& w : split(val, ':'))
        if (!trim(w).empty()) cfg.weights.push_back(std::stof(w));
    } else if (key == "episodes") {
      cfg.episodes = std::stoi(val);
    } else if (key == "workers") {
      cfg.workers = std::stoi(val);
    } else if (key == "batch_episodes") {
      cfg.batch_episodes = std::stoi(val);
    } else if (key == "gamma") {
      cfg.gamma = std::stof(val);
    } else if (key == "lam") {
      cfg.lam = std::stof(val);
    } else if (key == "lr") {
      cfg.lr = std::stof(val);
    } else if (key == "entropy_coef") {
      cfg.entropy_coef = std::stof(val);
    } else if (key == "value_coef") {
      cfg.value_coef = std::stof(val);
    } else if (key == "normalize_advantages") {
      cfg.normalize_advantages = val == "1";
    } else if (key == "eval_cadence") {
      cfg.eval_cadence = std::stoi(val);
    } else if (key == "eval_episodes") {
      cfg.eval_episodes = std::stoi(val);
    } else if (key == "baseline_width_mult") {
      cfg.baseline_width_mult = std::stof(val);
    } else if (key == "flatten") {
      cfg.flatten = val == "1";
    } else if (key == "seed") {
      cfg.seed = std::stoull(val);
    } else if (key == "out_dir") {
      cfg.out_dir = val;
    } else {
      throw Error("unknown train config key: " + key);
    }
  }
  if (!scene_text.empty()) cfg.scene = sim2d::SceneConfig::deserialize(scene_text);
  return cfg;
}

std::string TrainConfig::identity() const {
  TrainConfig c = *this;
  c.episodes = 0;
  c.workers = 1;
  c.eval_cadence = 0;
  c.eval_episodes = 1;
  c.out_dir.clear();
  return c.serialize();
}

void TrainConfig::validate() const {
  if (episodes < 0) throw Error("train config: episodes < 0");
  if (workers < 1) throw Error("train config: workers < 1");
  if (batch_episodes < 1) throw Error("train config: batch_episodes < 1");
  if (!(gamma > 0.f && gamma <= 1.f)) throw Error("train config: gamma outside (0,1]");
  if (!(lam > 0.f && lam <= 1.f)) throw Error("train config: lam outside (0,1]");
  if (!(lr > 0.f)) throw Error("train config: lr <= 0");
  if (entropy_coef < 0.f || value_coef < 0.f)
    throw Error("train config: negative loss coefficient");
  if (eval_cadence < 0) throw Error("train config: eval_cadence < 0");
  if (eval_episodes < 1) throw Error("train config: eval_episodes < 1");
  if (!(baseline_width_mult > 0.f)) throw Error("train config: baseline_width_mult <= 0");
  if (tasks.empty()) throw Error("train config: empty task set");
  if (static_cast<int>(tasks.size()) > kMaxTasks)
    throw Error("train config: more than 64 tasks");
  for (const auto& t : tasks)
    if (t.is_program())
      throw Error("train config: programs are sequenced by the dispatcher, not trained on");
  if (architecture == Architecture::De) {
    for (const auto& t : tasks)
      if (t.executor_id() != tasks[0].executor_id())
        throw Error("train config: one executor per run; mixed executor ids in task set");
  }
  if (!weights.empty()) {
    if (weights.size() != tasks.size())
      throw Error("train config: weights/tasks length mismatch");
    float sum = 0.f;
    for (const float w : weights) {
      if (w < 0.f) throw Error("train config: negative task weight");
      sum += w;
    }
    if (std::abs(sum - 1.f) > 1e-4f) throw Error("train config: weights do not sum to 1");
  }
  channel_config(channel);  // throws on an unknown name
}

nn::PolicyConfig policy_config(const TrainConfig& cfg) {
  nn::PolicyConfig p;
  p.image_size = cfg.scene.image_size;
  p.cameras = cfg.scene.cameras;
  p.proprio_dim = 4;
  p.action_dim = 3;
  p.flatten = cfg.flatten;
  if (cfg.architecture == Architecture::De) {
    p.in_channels = channel_config(cfg.channel).plane_count(cfg.tasks.at(0).arity());
    p.extra_dim = 0;
  } else {
    p.in_channels = 3;  // raw RGB
    p.extra_dim = static_cast<int>(cfg.tasks.size());
    if (cfg.baseline_width_mult != 1.0f) {
      for (int& w : p.widths)
        w = std::max(1, static_cast<int>(std::lround(w * cfg.baseline_width_mult)));
      p.mlp_width =
          std::max(1, static_cast<int>(std::lround(p.mlp_width * cfg.baseline_width_mult)));
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Rollouts

int sample_task(const TrainConfig& cfg, Rng& rng) {
  const double u = rng.uniform();
  if (cfg.weights.empty()) {
    const int n = static_cast<int>(cfg.tasks.size());
    return std::min(n - 1, static_cast<int>(u * n));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < cfg.weights.size(); ++i) {
    acc += cfg.weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(cfg.weights.size()) - 1;
}

namespace {

Eigen::VectorXf task_onehot(int task_index, int n_tasks) {
  Eigen::VectorXf v = Eigen::VectorXf::Zero(n_tasks);
  v[task_index] = 1.f;
  return v;
}

// One full episode under a fixed snapshot; a pure function of (cfg, params,
// index), which is what makes rollouts scheduling-independent.
void run_episode(const TrainConfig& cfg, const nn::ParamMap<float>& params,
                 const nn::PolicyConfig& pcfg, const codec::ChannelConfig& cc, int index,
                 std::vector<Transition>* steps, EpisodeStats* stats) {
  const std::uint64_t es = episode_seed(cfg.seed, index);
  Rng rng(es);
  const int ti = sample_task(cfg, rng);
  const TaskSpec& task = cfg.tasks[ti];
  const bool de = cfg.architecture == Architecture::De;
  const Eigen::VectorXf onehot =
      de ? Eigen::VectorXf() : task_onehot(ti, static_cast<int>(cfg.tasks.size()));

  sim2d::Env env(cfg.scene, task);
  env.reset(rng.bits());

  float ret = 0.f;
  int n = 0;
  bool done = false;
  while (!done) {
    Transition tr;
    nn::PolicyOutput out;
    if (de) {
      const codec::Message msg = dispatcher::dispatch(task, env.obs(), cc);
      out = nn::executor_forward(msg, params, pcfg);
      tr.planes = nn::message_planes<float>(msg);
      tr.vec = msg.proprio;
    } else {
      out = nn::baseline_forward(env.obs(), onehot, params, pcfg);
      tr.planes = nn::observation_planes<float>(env.obs());
      tr.vec.resize(4 + onehot.size());
      tr.vec << env.obs().proprio, onehot;
    }
    const nn::ActionSample as = nn::sample_action(out, rng, /*greedy=*/false);
    tr.action = as.action;
    tr.presquash = as.presquash;
    tr.log_prob = as.log_prob;
    tr.value = out.value;
    const auto [r, d] = env.step(sim2d::Action(as.action[0], as.action[1], as.action[2]));
    tr.reward = r;
    tr.done = d;
    steps->push_back(std::move(tr));
    ret += r;
    ++n;
    done = d;
  }
  *stats = {index, ti, es, ret, n, env.state().success_latched};
}

}  // namespace

RolloutBatch collect_rollouts(const TrainConfig& cfg, const nn::ParamMap<float>& params,
                              int first_index, int n_episodes) {
  if (n_episodes < 1) throw Error("collect_rollouts: n_episodes < 1");
  const nn::PolicyConfig pcfg = policy_config(cfg);
  const codec::ChannelConfig cc = channel_config(cfg.channel);

  std::vector<std::vector<Transition>> per_ep(n_episodes);
  std::vector<EpisodeStats> stats(n_episodes);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto work = [&]() {
    try {
      for (;;) {
        const int k = next.fetch_add(1);
        if (k >= n_episodes) return;
        run_episode(cfg, params, pcfg, cc, first_index + k, &per_ep[k], &stats[k]);
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };

  const int n_workers = std::min(std::max(1, cfg.workers), n_episodes);
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  RolloutBatch out;
  out.episodes = std::move(stats);
  std::size_t total = 0;
  for (const auto& ep : per_ep) total += ep.size();
  out.steps.reserve(total);
  for (auto& ep : per_ep)  // index order, so the batch is scheduling-independent
    for (auto& tr : ep) out.steps.push_back(std::move(tr));
  return out;
}

// ---------------------------------------------------------------------------
// A2C update

std::vector<float> gae_advantages(const std::vector<Transition>& steps, float gamma, float lam) {
  const int n = static_cast<int>(steps.size());
  std::vector<float> adv(n);
  float acc = 0.f;
  for (int t = n - 1; t >= 0; --t) {
    const bool term = steps[t].done;
    const float next_v = (term || t + 1 == n) ? 0.f : steps[t + 1].value;
    const float delta = steps[t].reward + gamma * next_v - steps[t].value;
    acc = delta + gamma * lam * (term ? 0.f : acc);
    adv[t] = acc;
  }
  return adv;
}

UpdateStats a2c_update(const RolloutBatch& batch, nn::ParamMap<float>& params,
                       nn::AdamState<float>& opt, const TrainConfig& cfg) {
  const auto& steps = batch.steps;
  if (steps.empty()) throw Error("a2c_update: empty batch");
  const int B = static_cast<int>(steps.size());
  const nn::PolicyConfig pcfg = policy_config(cfg);
  const int D = pcfg.action_dim;

  const std::vector<float> adv = gae_advantages(steps, cfg.gamma, cfg.lam);
  Eigen::RowVectorXf a_row(B), target(B);
  for (int i = 0; i < B; ++i) {
    a_row[i] = adv[i];
    target[i] = adv[i] + steps[i].value;  // GAE(lambda) return as value target
  }
  if (cfg.normalize_advantages) {
    const float mean = a_row.mean();
    const float var = (a_row.array() - mean).square().sum() / static_cast<float>(B);
    a_row = (a_row.array() - mean) / (std::sqrt(var) + 1e-8f);
  }

  nn::Graph<float> g;
  const nn::LeafIds<float> leaves = nn::make_leaves(g, params);
  std::vector<nn::SamplePlanes<float>> planes;
  planes.reserve(B);
  nn::Mat<float> vec(pcfg.vec_dim(), B), u(D, B), corr(1, B);
  for (int i = 0; i < B; ++i) {
    planes.push_back(steps[i].planes);
    if (steps[i].vec.size() != pcfg.vec_dim() || steps[i].presquash.size() != D)
      throw ShapeMismatch("a2c_update: transition does not match the policy config");
    vec.col(i) = steps[i].vec;
    u.col(i) = steps[i].presquash;
    float c = 0.f;
    for (int d = 0; d < D; ++d) {
      const float th = std::tanh(steps[i].presquash[d]);
      c += std::log(1.f - th * th + nn::kSquashEps);
    }
    corr(0, i) = c;
  }

  const nn::PolicyNodes<float> nodes = nn::policy_graph(g, leaves, pcfg, planes, g.leaf(vec));

  // log pi(a|s) per column, through mean and log_std.
  const int diff = g.sub(g.leaf(u), nodes.mean);
  const int inv_std = g.exp(g.scale(nodes.log_std, -1.f));
  const int z = g.mul_colvec(diff, inv_std);
  const int quad = g.colwise_sum(g.scale(g.mul(z, z), -0.5f));              // (1,B)
  const int nls = g.scale(g.colwise_sum(nodes.log_std), -1.f);              // (1,1)
  const int logp = g.sub(
      g.add_scalar(g.add_colvec(quad, nls), -static_cast<float>(D) * kHalfLog2Pi),
      g.leaf(corr));

  // -E[logp * A]: fold the -1/B into the advantage weights.
  nn::Mat<float> w(1, B);
  for (int i = 0; i < B; ++i) w(0, i) = -a_row[i] / static_cast<float>(B);
  const int ploss = g.sum(g.mul(logp, g.leaf(w)));

  nn::Mat<float> tgt(1, B);
  for (int i = 0; i < B; ++i) tgt(0, i) = target[i];
  const int vdiff = g.sub(nodes.value, g.leaf(tgt));
  const int vmse = g.scale(g.sum(g.mul(vdiff, vdiff)), 1.f / static_cast<float>(B));
  const int vterm = g.scale(vmse, cfg.value_coef);

  // Entropy of the pre-squash Gaussian (the squashed entropy has no closed
  // form; the Gaussian bound is the standard A2C regularizer).
  const int ent = g.add_scalar(g.colwise_sum(nodes.log_std),
                               static_cast<float>(D) * kGaussEntConst);
  const int eterm = g.scale(ent, -cfg.entropy_coef);

  const int total = g.add(ploss, g.add(vterm, eterm));
  g.backward(total);

  nn::ParamMap<float> grads;
  for (const auto& [name, id] : leaves.at) grads[name] = g.grad(id);

  UpdateStats stats;
  stats.policy_loss = g.val(ploss)(0, 0);
  stats.value_loss = g.val(vmse)(0, 0);
  stats.entropy = g.val(ent)(0, 0);
  stats.grad_norm = nn::global_norm(grads);
  nn::optimizer_step(params, grads, opt, cfg.lr);
  return stats;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalOutcome evaluate(const TrainConfig& cfg, const nn::ParamMap<float>& params,
                     const EvalSpec& spec) {
  const nn::PolicyConfig pcfg = policy_config(cfg);
  const codec::ChannelConfig cc = channel_config(cfg.channel);
  const bool de = cfg.architecture == Architecture::De;
  const TaskSpec& base_task = cfg.tasks.at(spec.task_index);
  const TaskSpec eval_task = recolor_task(base_task, spec.recolor);
  const sim2d::SceneConfig scene = spec.scene.value_or(cfg.scene);
  const Eigen::VectorXf onehot =
      de ? Eigen::VectorXf()
         : task_onehot(spec.task_index, static_cast<int>(cfg.tasks.size()));

  int wins = 0;
  double ret_sum = 0.0;
  for (int e = 0; e < spec.n_episodes; ++e) {
    const std::uint64_t es = derive_seed(cfg.seed, SeedStream::Eval, spec.index_base + e);
    Rng rng(es);
    auto [state, obs] = sim2d::reset(scene, base_task, rng.bits());
    if (!spec.recolor.empty()) {
      state = sim2d::recolor_objects(state, spec.recolor);
      obs = sim2d::render(state);
    }
    float ret = 0.f;
    bool done = false;
    while (!done) {
      nn::PolicyOutput out;
      if (de) {
        const codec::Message msg = dispatcher::dispatch(eval_task, obs, cc);
        out = nn::executor_forward(msg, params, pcfg);
      } else {
        out = nn::baseline_forward(obs, onehot, params, pcfg);
      }
      Rng unused(0);  // greedy draws nothing
      const nn::ActionSample as = nn::sample_action(out, unused, /*greedy=*/true);
      sim2d::StepResult sr =
          sim2d::step(state, sim2d::Action(as.action[0], as.action[1], as.action[2]), eval_task);
      state = std::move(sr.state);
      obs = std::move(sr.obs);
      ret += sr.reward;
      done = sr.done;
    }
    wins += state.success_latched ? 1 : 0;
    ret_sum += ret;
  }
  EvalOutcome out;
  out.success = static_cast<float>(wins) / static_cast<float>(spec.n_episodes);
  out.mean_return = static_cast<float>(ret_sum / spec.n_episodes);
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

std::string LearningCurve::csv() const {
  std::ostringstream os;
  os << "episode,task,success,mean_return\n";
  for (const auto& r : rows)
    os << r.episode << "," << r.task << "," << fstr(r.success) << "," << fstr(r.mean_return)
       << "\n";
  return os.str();
}

LearningCurve LearningCurve::from_csv(const std::string& text) {
  LearningCurve curve;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || trim(line) != "episode,task,success,mean_return")
    throw Error("learning curve: bad header");
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 4) throw Error("learning curve: bad row: " + line);
    CurveRow r;
    r.episode = std::stoi(cells[0]);
    r.task = cells[1];
    r.success = std::stof(cells[2]);
    r.mean_return = std::stof(cells[3]);
    curve.rows.push_back(std::move(r));
  }
  return curve;
}

nn::Checkpoint train_checkpoint(const TrainConfig& cfg, const nn::ParamMap<float>& params,
                                const nn::AdamState<float>& opt, int episodes_done) {
  nn::Checkpoint ck;
  ck.config = cfg.identity();
  ck.tensors = params;
  for (const auto& [name, m] : opt.m) ck.tensors["opt.m." + name] = m;
  for (const auto& [name, v] : opt.v) ck.tensors["opt.v." + name] = v;
  ck.tensors["opt.t"] = nn::Mat<float>::Constant(1, 1, static_cast<float>(opt.t));
  ck.tensors["train.episodes"] =
      nn::Mat<float>::Constant(1, 1, static_cast<float>(episodes_done));
  return ck;
}

namespace {

const nn::Mat<float>& need_tensor(const nn::Checkpoint& ck, const std::string& name) {
  const auto it = ck.tensors.find(name);
  if (it == ck.tensors.end()) throw Error("resume: checkpoint lacks tensor " + name);
  return it->second;
}

void restore_train_state(const nn::Checkpoint& ck, nn::ParamMap<float>& params,
                         nn::AdamState<float>& opt, int& episodes_done) {
  for (auto& [name, value] : params) {
    const nn::Mat<float>& stored = need_tensor(ck, name);
    if (stored.rows() != value.rows() || stored.cols() != value.cols())
      throw ShapeMismatch("resume: tensor shape changed: " + name);
    value = stored;
    opt.m[name] = need_tensor(ck, "opt.m." + name);
    opt.v[name] = need_tensor(ck, "opt.v." + name);
  }
  opt.t = static_cast<long>(need_tensor(ck, "opt.t")(0, 0));
  episodes_done = static_cast<int>(need_tensor(ck, "train.episodes")(0, 0));
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const nn::PolicyConfig pcfg = policy_config(cfg);
  Rng init_rng(derive_seed(cfg.seed, SeedStream::Init, 0));
  nn::ParamMap<float> params = nn::init_params<float>(pcfg, init_rng);
  nn::AdamState<float> opt = nn::AdamState<float>::init(params);
  LearningCurve curve;
  int done_eps = 0;

  std::string ck_path, curve_path;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    ck_path = cfg.out_dir + "/checkpoint.bin";
    curve_path = cfg.out_dir + "/curve.csv";
    if (std::filesystem::exists(ck_path)) {
      const nn::Checkpoint ck = nn::load_checkpoint(ck_path);
      if (ck.config != cfg.identity())
        throw Error("train: cannot resume, config mismatch at " + ck_path);
      restore_train_state(ck, params, opt, done_eps);
      if (std::filesystem::exists(curve_path))
        curve = LearningCurve::from_csv(read_file(curve_path));
      while (!curve.rows.empty() && curve.rows.back().episode > done_eps) curve.rows.pop_back();
      DEBENCH_LOG_INFO("train: resumed %s at episode %d", ck_path.c_str(), done_eps);
    }
  }

  const auto write_artifacts = [&]() {
    if (cfg.out_dir.empty()) return;
    nn::save_checkpoint(ck_path, train_checkpoint(cfg, params, opt, done_eps));
    write_file(curve_path, curve.csv());
  };

  const auto run_eval = [&]() {
    for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
      EvalSpec spec;
      spec.task_index = static_cast<int>(t);
      spec.n_episodes = cfg.eval_episodes;
      spec.index_base = (static_cast<std::uint64_t>(done_eps) * kMaxTasks + t) *
                        static_cast<std::uint64_t>(cfg.eval_episodes);
      const EvalOutcome eo = evaluate(cfg, params, spec);
      curve.rows.push_back({done_eps, cfg.tasks[t].text(), eo.success, eo.mean_return});
      DEBENCH_LOG_INFO("eval @%d %s: success %.2f, return %.3f", done_eps,
                       cfg.tasks[t].text().c_str(), eo.success, eo.mean_return);
    }
    write_artifacts();
  };

  if (cfg.episodes == 0) {
    write_artifacts();
    return {std::move(params), pcfg, std::move(curve), 0};
  }

  float recent_ret = 0.f, recent_succ = 0.f;
  int recent_n = 0;
  while (done_eps < cfg.episodes) {
    const int n = std::min(cfg.batch_episodes, cfg.episodes - done_eps);
    const RolloutBatch batch = collect_rollouts(cfg, params, done_eps, n);
    a2c_update(batch, params, opt, cfg);
    for (const auto& ep : batch.episodes) {
      recent_ret += ep.ret;
      recent_succ += ep.success ? 1.f : 0.f;
      ++recent_n;
    }
    const int prev = done_eps;
    done_eps += n;
    if (recent_n >= 200) {
      DEBENCH_LOG_INFO("train @%d: mean return %.3f, success %.2f (last %d episodes)",
                       done_eps, recent_ret / recent_n, recent_succ / recent_n, recent_n);
      recent_ret = recent_succ = 0.f;
      recent_n = 0;
    }
    if (cfg.eval_cadence > 0 && done_eps / cfg.eval_cadence > prev / cfg.eval_cadence)
      run_eval();
  }
  if (curve.rows.empty() || curve.rows.back().episode != done_eps) run_eval();
  return {std::move(params), pcfg, std::move(curve), done_eps};
}

// ---------------------------------------------------------------------------
// Distillation

std::string DistillConfig::serialize() const {
  std::ostringstream os;
  os << "demo_task=" << demo_task.text() << "\n";
  os << "channel=" << channel << "\n";
  os << "n_demos=" << n_demos << "\n";
  os << "max_epochs=" << max_epochs << "\n";
  os << "batch_size=" << batch_size << "\n";
  os << "lr=" << fstr(lr) << "\n";
  os << "holdout_frac=" << fstr(holdout_frac) << "\n";
  os << "patience=" << patience << "\n";
  os << "plateau_eps=" << fstr(plateau_eps) << "\n";
  os << "eval_episodes=" << eval_episodes << "\n";
  os << "eval_tasks=";
  for (std::size_t i = 0; i < eval_tasks.size(); ++i) {
    if (i) os << ";";
    os << eval_tasks[i].text();
  }
  os << "\n";
  os << "seed=" << seed << "\n";
  os << "out_dir=" << out_dir << "\n";
  std::istringstream scene_is(scene.serialize());
  std::string line;
  while (std::getline(scene_is, line))
    if (!line.empty()) os << "scene." << line << "\n";
  return os.str();
}

DistillConfig DistillConfig::deserialize(const std::string& text) {
  DistillConfig cfg;
  cfg.eval_tasks.clear();
  std::string scene_text;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("bad distill config line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key.rfind("scene.", 0) == 0) {
      scene_text += key.substr(6) + "=" + val + "\n";
    } else if (key == "demo_task") {
      cfg.demo_task = dispatcher::parse_task(val);
    } else if (key == "channel") {
      cfg.channel = val;
    } else if (key == "n_demos") {
      cfg.n_demos = std::stoi(val);
    } else if (key == "max_epochs") {
      cfg.max_epochs = std::stoi(val);
    } else if (key == "batch_size") {
      cfg.batch_size = std::stoi(val);
    } else if (key == "lr") {
      cfg.lr = std::stof(val);
    } else if (key == "holdout_frac") {
      cfg.holdout_frac = std::stof(val);
    } else if (key == "patience") {
      cfg.patience = std::stoi(val);
    } else if (key == "plateau_eps") {
      cfg.plateau_eps = std::stof(val);
    } else if (key == "eval_episodes") {
      cfg.eval_episodes = std::stoi(val);
    } else if (key == "eval_tasks") {
      for (const auto& t : split(val, ';'))
        if (!trim(t).empty()) cfg.eval_tasks.push_back(dispatcher::parse_task(trim(t)));
    } else if (key == "seed") {
      cfg.seed = std::stoull(val);
    } else if (key == "out_dir") {
      cfg.out_dir = val;
    } else {
      throw Error("unknown distill config key: " + key);
    }
  }
  if (!scene_text.empty()) cfg.scene = sim2d::SceneConfig::deserialize(scene_text);
  return cfg;
}

void DistillConfig::validate() const {
  if (n_demos < 0) throw Error("distill config: n_demos < 0");
  if (demo_task.is_program()) throw Error("distill config: demo task must be lift or stack");
  if (max_epochs < 1) throw Error("distill config: max_epochs < 1");
  if (batch_size < 1) throw Error("distill config: batch_size < 1");
  if (!(lr > 0.f)) throw Error("distill config: lr <= 0");
  if (!(holdout_frac > 0.f && holdout_frac < 0.9f))
    throw Error("distill config: holdout_frac outside (0, 0.9)");
  if (patience < 1) throw Error("distill config: patience < 1");
  if (eval_episodes < 1) throw Error("distill config: eval_episodes < 1");
  for (const auto& t : eval_tasks) {
    if (t.is_program()) throw Error("distill config: program in eval_tasks");
    if (t.executor_id() != demo_task.executor_id())
      throw Error("distill config: eval task uses a different executor than the demos");
  }
  channel_config(channel);
}

DemoDataset collect_demos(const DistillConfig& cfg, const TeacherFn& teacher) {
  cfg.validate();
  if (cfg.n_demos == 0) throw EmptyDataset("collect_demos: n_demos = 0, nothing to learn from");
  const codec::ChannelConfig cc = channel_config(cfg.channel);
  DemoDataset ds;
  int wins = 0;
  for (int i = 0; i < cfg.n_demos; ++i) {
    const std::uint64_t es = derive_seed(cfg.seed, SeedStream::Demo, i);
    sim2d::Env env(cfg.scene, cfg.demo_task);
    env.reset(es);
    bool done = false;
    while (!done) {
      DemoRecord rec;
      rec.msg = dispatcher::dispatch(cfg.demo_task, env.obs(), cc);
      const sim2d::Action a = teacher(env.state(), rec.msg);
      rec.action = a.v;
      ds.records.push_back(std::move(rec));
      done = env.step(a).second;
    }
    wins += env.state().success_latched ? 1 : 0;
  }
  ds.demos = cfg.n_demos;
  ds.teacher_rate = static_cast<float>(wins) / static_cast<float>(cfg.n_demos);
  if (ds.teacher_rate < 0.5f)
    throw TeacherFailure("collect_demos: teacher success rate " +
                         std::to_string(ds.teacher_rate) + " < 0.5");
  return ds;
}

DemoDataset collect_demos(const DistillConfig& cfg) {
  return collect_demos(cfg, [&cfg](const sim2d::SceneState& state, const codec::Message&) {
    return sim2d::scripted_expert(state, cfg.demo_task);
  });
}

namespace {

std::string record_key(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "rec.%06d", i);
  return buf;
}

}  // namespace

nn::Checkpoint dataset_checkpoint(const DemoDataset& ds, const DistillConfig& cfg) {
  nn::Checkpoint ck;
  std::ostringstream os;
  os << "kind=distill_dataset\n";
  os << "executor=" << cfg.demo_task.executor_id() << "\n";
  os << "channel=" << cfg.channel << "\n";
  os << "image_size=" << cfg.scene.image_size << "\n";
  os << "cameras=" << cfg.scene.cameras << "\n";
  os << "demos=" << ds.demos << "\n";
  os << "teacher_rate=" << fstr(ds.teacher_rate) << "\n";
  os << "records=" << ds.records.size() << "\n";
  ck.config = os.str();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    const std::string key = record_key(static_cast<int>(i));
    const auto planes = nn::message_planes<float>(rec.msg);
    for (std::size_t cam = 0; cam < planes.size(); ++cam)
      ck.tensors[key + ".cam" + std::to_string(cam)] = planes[cam];
    ck.tensors[key + ".proprio"] = rec.msg.proprio;
    ck.tensors[key + ".action"] = rec.action;
  }
  return ck;
}

DemoDataset dataset_from_checkpoint(const nn::Checkpoint& ck) {
  std::map<std::string, std::string> meta;
  std::istringstream is(ck.config);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("distill dataset: bad config line: " + line);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (meta["kind"] != "distill_dataset") throw Error("distill dataset: wrong container kind");
  const int n = std::stoi(meta.at("records"));
  const int cameras = std::stoi(meta.at("cameras"));
  const int side = std::stoi(meta.at("image_size"));
  const std::string executor = meta.at("executor");

  DemoDataset ds;
  ds.demos = std::stoi(meta.at("demos"));
  ds.teacher_rate = std::stof(meta.at("teacher_rate"));
  ds.records.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::string key = record_key(i);
    DemoRecord rec;
    rec.msg.executor_id = executor;
    for (int cam = 0; cam < cameras; ++cam) {
      const auto& stack = ck.tensors.at(key + ".cam" + std::to_string(cam));
      if (stack.cols() != static_cast<Eigen::Index>(side) * side)
        throw ShapeMismatch("distill dataset: plane stack does not match image_size");
      std::vector<Plane> planes;
      for (Eigen::Index c = 0; c < stack.rows(); ++c) {
        Plane p(side, side);
        for (int r = 0; r < side; ++r)
          for (int w = 0; w < side; ++w) p(r, w) = stack(c, r * side + w);
        planes.push_back(std::move(p));
      }
      rec.msg.planes.push_back(std::move(planes));
    }
    const auto& prop = ck.tensors.at(key + ".proprio");
    const auto& act = ck.tensors.at(key + ".action");
    if (prop.rows() != 4 || prop.cols() != 1 || act.rows() != 3 || act.cols() != 1)
      throw ShapeMismatch("distill dataset: bad proprio/action shape in " + key);
    rec.msg.proprio = prop;
    rec.action = act;
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

namespace {

// Held-out mean-squared action error of the greedy head, in forward chunks.
float holdout_mse(const DemoDataset& ds, const std::vector<int>& idx,
                  const nn::ParamMap<float>& params, const nn::PolicyConfig& pcfg) {
  double sq_sum = 0.0;
  long count = 0;
  const int chunk = 128;
  for (std::size_t at = 0; at < idx.size(); at += chunk) {
    const int b = static_cast<int>(std::min<std::size_t>(chunk, idx.size() - at));
    nn::Graph<float> g;
    const auto leaves = nn::make_leaves(g, params);
    std::vector<nn::SamplePlanes<float>> planes;
    planes.reserve(b);
    nn::Mat<float> vec(pcfg.vec_dim(), b);
    for (int i = 0; i < b; ++i) {
      const auto& rec = ds.records[idx[at + i]];
      planes.push_back(nn::message_planes<float>(rec.msg));
      vec.col(i) = rec.msg.proprio;
    }
    const auto nodes = nn::policy_graph(g, leaves, pcfg, planes, g.leaf(vec));
    const nn::Mat<float>& mean = g.val(nodes.mean);
    for (int i = 0; i < b; ++i) {
      const auto& rec = ds.records[idx[at + i]];
      for (int d = 0; d < 3; ++d) {
        const float e = std::tanh(mean(d, i)) - rec.action[d];
        sq_sum += static_cast<double>(e) * e;
      }
    }
    count += 3L * b;
  }
  return static_cast<float>(sq_sum / static_cast<double>(count));
}

}  // namespace

DistillResult distill(const DistillConfig& cfg) {
  cfg.validate();
  const DemoDataset ds = collect_demos(cfg);

  nn::PolicyConfig pcfg;
  pcfg.image_size = cfg.scene.image_size;
  pcfg.cameras = cfg.scene.cameras;
  pcfg.in_channels = channel_config(cfg.channel).plane_count(cfg.demo_task.arity());
  pcfg.proprio_dim = 4;
  pcfg.extra_dim = 0;

  Rng init_rng(derive_seed(cfg.seed, SeedStream::Init, 0));
  nn::ParamMap<float> params = nn::init_params<float>(pcfg, init_rng);
  nn::AdamState<float> opt = nn::AdamState<float>::init(params);

  // Deterministic split: shuffle, carve off the holdout tail.
  std::vector<int> order(ds.records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(cfg.seed, SeedStream::Init, 1));
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
  const int n_hold = std::max(
      1, static_cast<int>(std::lround(cfg.holdout_frac * static_cast<float>(order.size()))));
  if (static_cast<int>(order.size()) <= n_hold)
    throw EmptyDataset("distill: not enough records to split off a holdout set");
  const std::vector<int> hold(order.end() - n_hold, order.end());
  std::vector<int> tr(order.begin(), order.end() - n_hold);

  float best = std::numeric_limits<float>::infinity();
  int bad = 0, epochs = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (int i = static_cast<int>(tr.size()) - 1; i > 0; --i)
      std::swap(tr[i], tr[shuffle_rng.uniform_int(i + 1)]);
    for (std::size_t at = 0; at < tr.size(); at += cfg.batch_size) {
      const int b = static_cast<int>(std::min<std::size_t>(cfg.batch_size, tr.size() - at));
      nn::Graph<float> g;
      const auto leaves = nn::make_leaves(g, params);
      std::vector<nn::SamplePlanes<float>> planes;
      planes.reserve(b);
      nn::Mat<float> vec(pcfg.vec_dim(), b), target(3, b);
      for (int i = 0; i < b; ++i) {
        const auto& rec = ds.records[tr[at + i]];
        planes.push_back(nn::message_planes<float>(rec.msg));
        vec.col(i) = rec.msg.proprio;
        target.col(i) = rec.action;
      }
      const auto nodes = nn::policy_graph(g, leaves, pcfg, planes, g.leaf(vec));
      const int d = g.sub(g.tanh(nodes.mean), g.leaf(target));
      const int mse = g.scale(g.sum(g.mul(d, d)), 1.f / (3.f * static_cast<float>(b)));
      g.backward(mse);
      nn::ParamMap<float> grads;
      for (const auto& [name, id] : leaves.at) grads[name] = g.grad(id);
      nn::optimizer_step(params, grads, opt, cfg.lr);
    }
    ++epochs;
    const float mse = holdout_mse(ds, hold, params, pcfg);
    DEBENCH_LOG_DEBUG("distill epoch %d: holdout mse %.5f", epoch, mse);
    if (best - mse > cfg.plateau_eps) {
      best = mse;
      bad = 0;
    } else if (++bad >= cfg.patience) {
      break;
    }
  }

  DistillResult out;
  out.net = pcfg;
  out.report.teacher_rate = ds.teacher_rate;
  out.report.demos = ds.demos;
  out.report.records = static_cast<int>(ds.records.size());
  out.report.epochs = epochs;
  out.report.holdout_mse = best;

  std::vector<TaskSpec> eval_tasks = cfg.eval_tasks;
  if (eval_tasks.empty()) eval_tasks.push_back(cfg.demo_task);
  for (std::size_t t = 0; t < eval_tasks.size(); ++t) {
    TrainConfig tc;
    tc.architecture = Architecture::De;
    tc.channel = cfg.channel;
    tc.scene = cfg.scene;
    tc.tasks = {eval_tasks[t]};
    tc.seed = cfg.seed;
    EvalSpec spec;
    spec.task_index = 0;
    spec.n_episodes = cfg.eval_episodes;
    spec.index_base = t * 100000ULL;
    const EvalOutcome eo = evaluate(tc, params, spec);
    out.report.eval.emplace_back(eval_tasks[t].text(), eo.success);
    DEBENCH_LOG_INFO("distill eval %s: success %.2f", eval_tasks[t].text().c_str(), eo.success);
  }
  out.params = std::move(params);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    nn::save_checkpoint(cfg.out_dir + "/dataset.bin", dataset_checkpoint(ds, cfg));
    nn::Checkpoint student;
    student.config = "kind=distill_student\npolicy:\n" + pcfg.serialize() + "\ndistill:\n" +
                     cfg.serialize();
    student.tensors = out.params;
    nn::save_checkpoint(cfg.out_dir + "/student.bin", student);
    std::ostringstream rep;
    rep << "key,value\n";
    rep << "teacher_rate," << fstr(out.report.teacher_rate) << "\n";
    rep << "demos," << out.report.demos << "\n";
    rep << "records," << out.report.records << "\n";
    rep << "epochs," << out.report.epochs << "\n";
    rep << "holdout_mse," << fstr(out.report.holdout_mse) << "\n";
    for (const auto& [task, rate] : out.report.eval)
      rep << "eval." << task << "," << fstr(rate) << "\n";
    write_file(cfg.out_dir + "/report.csv", rep.str());
  }
  return out;
}

}  // namespace debench::trainer

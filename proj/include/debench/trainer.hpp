#ifndef DEBENCH_TRAINER_HPP_
#define DEBENCH_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "debench/codec.hpp"
#include "debench/common.hpp"
#include "debench/nn/adam.hpp"
#include "debench/nn/checkpoint.hpp"
#include "debench/nn/policy.hpp"
#include "debench/sim2d.hpp"
#include "debench/task.hpp"

namespace debench::trainer {

// ---------------------------------------------------------------------------
// Configuration

enum class Architecture : int { De = 0, Baseline };

std::string_view architecture_name(Architecture a);
std::optional<Architecture> architecture_from_name(std::string_view s);

struct TrainConfig {
  Architecture architecture = Architecture::De;
  std::string channel = "mask_edge";  // codec::ChannelConfig name
  sim2d::SceneConfig scene;
  std::vector<TaskSpec> tasks;  // lift/stack only; for De all one executor_id
  std::vector<float> weights;   // sampling weights; empty = uniform, else sums to 1
  int episodes = 5000;
  int workers = 1;
  int batch_episodes = 8;  // episodes per update
  float gamma = 0.99f;
  float lam = 0.95f;  // GAE lambda
  float lr = 3e-4f;
  float entropy_coef = 0.003f;
  float value_coef = 0.5f;
  bool normalize_advantages = true;
  int eval_cadence = 500;  // episodes between greedy evals; 0 = final eval only
  int eval_episodes = 50;  // per task
  // Capacity knob for the monolithic baseline (kept at parity by default);
  // scales encoder widths and the MLP trunk.
  float baseline_width_mult = 1.0f;
  // Feed the trunk the flattened embedding grid instead of its spatial mean.
  // Mean pooling is the lean default; flattening keeps target position crisp
  // and is what the tuned training recipes use.
  bool flatten = false;
  std::uint64_t seed = 0;
  std::string out_dir;  // if set: checkpoint.bin + curve.csv, resumable

  std::string serialize() const;  // key=value lines; scene nested as scene.*
  static TrainConfig deserialize(const std::string& text);
  void validate() const;  // throws Error on any violated invariant

  // Trajectory identity: the fields that determine the parameter sequence.
  // Budget and reporting knobs (episodes, workers, eval cadence/size, out_dir)
  // are canonicalized away so a longer run can resume a shorter one's
  // checkpoint — per-episode behavior is a pure function of the episode index.
  std::string identity() const;
};

// Network shape implied by a train config. The fairness law lives here: De
// and Baseline runs differ only in input-layer shape (in_channels/extra_dim)
// and, if explicitly requested, the baseline width multiplier.
nn::PolicyConfig policy_config(const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Rollouts

// One environment step as the learner sees it. Inputs are stored in network
// form so the update is architecture-agnostic: for the D/E executor the
// planes come from the dispatcher's message and vec is proprio; for the
// baseline the planes are raw RGB and vec is proprio + task one-hot.
struct Transition {
  nn::SamplePlanes<float> planes;  // per camera (C, H*W)
  Eigen::VectorXf vec;
  Eigen::VectorXf action;     // executed (tanh-squashed) action
  Eigen::VectorXf presquash;  // Gaussian draw u with action = tanh(u)
  float reward = 0.0f;
  bool done = false;
  float log_prob = 0.0f;  // behavior log-density at collection time
  float value = 0.0f;     // V(s) at collection time
};

struct EpisodeStats {
  int index = 0;  // global episode index (the seed-derivation input)
  int task = 0;   // index into TrainConfig::tasks
  std::uint64_t seed = 0;
  float ret = 0.0f;  // undiscounted return
  int steps = 0;
  bool success = false;
};

struct RolloutBatch {
  std::vector<Transition> steps;  // episodes concatenated in index order
  std::vector<EpisodeStats> episodes;
};

// Scheduling-independent episode seed: a pure function of (run seed, index),
// so the worker count can never change which seed an episode sees.
inline std::uint64_t episode_seed(std::uint64_t run_seed, int index) {
  return derive_seed(run_seed, SeedStream::Rollout, static_cast<std::uint64_t>(index));
}

// Weighted draw from the task set; consumes exactly one uniform variate.
int sample_task(const TrainConfig& cfg, Rng& rng);

// Plays episodes [first_index, first_index + n) to completion under the given
// parameter snapshot, fanning out across cfg.workers threads (each owning a
// private environment). The result is identical for any worker count.
RolloutBatch collect_rollouts(const TrainConfig& cfg, const nn::ParamMap<float>& params,
                              int first_index, int n_episodes);

// ---------------------------------------------------------------------------
// A2C update

// Generalized advantage estimation over done-delimited episodes. Episodes
// truncated by the step limit are treated as terminal (no bootstrap).
std::vector<float> gae_advantages(const std::vector<Transition>& steps, float gamma, float lam);

struct UpdateStats {
  float policy_loss = 0.0f;
  float value_loss = 0.0f;  // plain MSE, before value_coef
  float entropy = 0.0f;     // Gaussian entropy of the pre-squash distribution
  float grad_norm = 0.0f;   // global norm before clipping
};

// loss = -E[log pi(a|s) * A] + value_coef * MSE(V, A + V_old) - entropy_coef * H,
// one Adam step. Throws on an empty batch; NonFiniteGradient propagates with
// params and optimizer state untouched.
UpdateStats a2c_update(const RolloutBatch& batch, nn::ParamMap<float>& params,
                       nn::AdamState<float>& opt, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalSpec {
  int task_index = 0;              // base task; also the baseline's one-hot slot
  std::map<Color, Color> recolor;  // applied to world and instruction after reset
  int n_episodes = 50;
  std::uint64_t index_base = 0;  // offset into the Eval seed stream
  std::optional<sim2d::SceneConfig> scene;  // override (robustness variants)
};

struct EvalOutcome {
  float success = 0.0f;
  float mean_return = 0.0f;
};

// Greedy rollouts on the Eval seed stream (disjoint from training by stream
// id). With a recolor map, the scene is reset for the base task, repainted,
// and judged under the recolored instruction; the baseline keeps its original
// one-hot slot — the instruction change is invisible to a monolithic policy.
EvalOutcome evaluate(const TrainConfig& cfg, const nn::ParamMap<float>& params,
                     const EvalSpec& spec);

// ---------------------------------------------------------------------------
// Training loop

struct CurveRow {
  int episode = 0;
  std::string task;
  float success = 0.0f;
  float mean_return = 0.0f;
};

struct LearningCurve {
  std::vector<CurveRow> rows;
  std::string csv() const;  // header: episode,task,success,mean_return
  static LearningCurve from_csv(const std::string& text);
};

struct TrainResult {
  nn::ParamMap<float> params;
  nn::PolicyConfig net;
  LearningCurve curve;
  int episodes_done = 0;
};

// Alternates collect_rollouts / a2c_update, evaluating greedily every
// eval_cadence episodes and always at the end (unless episodes == 0). With
// out_dir set, writes checkpoint.bin + curve.csv at every eval and resumes
// from them when re-invoked with the same config.
TrainResult train(const TrainConfig& cfg);

// Checkpoint plumbing shared with the CLI: parameters plus optimizer state
// and the episode counter, hashed against the serialized train config.
nn::Checkpoint train_checkpoint(const TrainConfig& cfg, const nn::ParamMap<float>& params,
                                const nn::AdamState<float>& opt, int episodes_done);

// ---------------------------------------------------------------------------
// Distillation (teacher -> student behavioral cloning)

struct DistillConfig {
  TaskSpec demo_task = TaskSpec::stack(Color::Red, Color::Blue);
  std::string channel = "mask_edge";
  sim2d::SceneConfig scene;
  int n_demos = 100;
  int max_epochs = 60;
  int batch_size = 64;
  float lr = 1e-3f;
  float holdout_frac = 0.1f;
  int patience = 5;          // epochs without holdout improvement before stop
  float plateau_eps = 1e-4f; // improvement below this does not reset patience
  int eval_episodes = 50;
  std::vector<TaskSpec> eval_tasks;  // empty = just the demo task
  std::uint64_t seed = 0;
  std::string out_dir;

  std::string serialize() const;
  static DistillConfig deserialize(const std::string& text);
  void validate() const;
};

struct DemoRecord {
  codec::Message msg;
  Eigen::Vector3f action;
};

struct DemoDataset {
  std::vector<DemoRecord> records;
  int demos = 0;
  float teacher_rate = 0.0f;
};

// Rolls the scripted expert on the demo task, storing one (message, action)
// record per step. Throws EmptyDataset when n_demos < 1 and TeacherFailure
// when the expert's success rate drops below 0.5.
DemoDataset collect_demos(const DistillConfig& cfg);

// Same, with a caller-supplied teacher: a map from (ground-truth state,
// channel message) to an action. Lets a learned policy stand in for the
// scripted expert; the same TeacherFailure gate applies.
using TeacherFn = std::function<sim2d::Action(const sim2d::SceneState&, const codec::Message&)>;
DemoDataset collect_demos(const DistillConfig& cfg, const TeacherFn& teacher);

// The demo stream in the checkpoint tensor container: per record
// rec.NNNNNN.camK (plane stack), rec.NNNNNN.proprio, rec.NNNNNN.action.
// No raw pixels anywhere — the student never sees color.
nn::Checkpoint dataset_checkpoint(const DemoDataset& ds, const DistillConfig& cfg);
DemoDataset dataset_from_checkpoint(const nn::Checkpoint& ck);

struct DistillReport {
  float teacher_rate = 0.0f;
  int demos = 0;
  int records = 0;
  int epochs = 0;
  float holdout_mse = 0.0f;
  std::vector<std::pair<std::string, float>> eval;  // task text -> success
};

struct DistillResult {
  nn::ParamMap<float> params;
  nn::PolicyConfig net;
  DistillReport report;
};

// Mean-squared regression of tanh(mean) onto the teacher's actions until the
// held-out error plateaus, then greedy evaluation on eval_tasks.
DistillResult distill(const DistillConfig& cfg);

}  // namespace debench::trainer

#endif  // DEBENCH_TRAINER_HPP_

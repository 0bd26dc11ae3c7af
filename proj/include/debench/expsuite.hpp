#ifndef DEBENCH_EXPSUITE_HPP_
#define DEBENCH_EXPSUITE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "debench/trainer.hpp"

namespace debench::expsuite {

// ---------------------------------------------------------------------------
// Study roster

enum class Study : int {
  SingleTransfer = 0,  // train on lift red, probe lift green/blue
  Multitask,           // three lift tasks at budget B and 3B
  ShapesAblation,      // channel variants on multi-shape scenes
  Robustness,          // lift-red checkpoints under scene variants
  DistillTransfer,     // cloned stacking across color pairs
  Programs,            // two_towers / triple_stack via dispatcher sequencing
};

std::string_view study_name(Study s);
std::optional<Study> study_from_name(std::string_view s);

struct StudySpec {
  Study study = Study::SingleTransfer;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int episodes = 5000;       // training budget B per run
  int eval_episodes = 50;    // evaluation episodes per report cell
  int demos = 100;           // demonstration budget for distillation studies
  int program_episodes = 100;
  int workers = 1;
  std::string out_dir;

  std::string serialize() const;  // key=value lines
  static StudySpec deserialize(const std::string& text);
  // Throws Error: fewer than 3 seeds (mean/min/max over seeds is the unit of
  // reporting), duplicate seeds, non-positive budgets, or an empty out_dir.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string study;
  std::string condition;
  std::string task;
  std::uint64_t seed = 0;
  int n = 0;
  float success = 0.f;
};

struct AggregateRow {
  std::string study;
  std::string condition;
  std::string task;
  float mean = 0.f;
  float min = 0.f;
  float max = 0.f;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  std::string csv() const;  // header: study,condition,task,seed,n,success
  static EvalReport from_csv(const std::string& text);

  // Mean/min/max of success over seeds, grouped by (study, condition, task)
  // in first-appearance order.
  std::vector<AggregateRow> aggregate() const;

  // Mean success over every row matching the filters (empty = match all).
  float mean_success(std::string_view condition = {}, std::string_view task = {}) const;
};

std::string aggregate_csv(const std::vector<AggregateRow>& rows);

// ---------------------------------------------------------------------------
// Study runners. Each trains (or resumes finished runs from out_dir/runs),
// evaluates every cell with at least eval_episodes episodes, and returns the
// per-seed rows. run_study also emits the study's CSVs and charts.

EvalReport run_single_transfer(const StudySpec& spec);
EvalReport run_multitask(const StudySpec& spec);
EvalReport run_shapes_ablation(const StudySpec& spec);
EvalReport run_robustness(const StudySpec& spec);
EvalReport run_distill_transfer(const StudySpec& spec);
EvalReport run_programs(const StudySpec& spec);

EvalReport run_study(const StudySpec& spec);

// Writes <study>.csv per report, aggregate.csv across all of them, and a bar
// chart PNG per study (mean over seeds, min-max whiskers). Re-emission over
// the same inputs is byte-identical.
void emit_report(const std::vector<EvalReport>& reports, const std::string& dir);

// The tuned training recipe studies build on: flattened embedding, the given
// architecture/tasks/budget, and shared hyperparameters, so that de and
// baseline runs differ only in input construction.
trainer::TrainConfig study_train_config(trainer::Architecture arch,
                                        const std::vector<TaskSpec>& tasks,
                                        const sim2d::SceneConfig& scene, int episodes,
                                        int eval_episodes, std::uint64_t seed,
                                        const std::string& out_dir, int workers);

}  // namespace debench::expsuite

#endif  // DEBENCH_EXPSUITE_HPP_

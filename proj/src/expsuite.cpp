#include "debench/expsuite.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "debench/dispatcher.hpp"
#include "debench/plot.hpp"
#include "debench/pngio.hpp"

namespace debench::expsuite {
namespace {

std::string fstr(float v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f << text;
  if (!f) throw Error("short write: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

constexpr std::string_view kStudyNames[] = {"single_transfer", "multitask",     "shapes_ablation",
                                            "robustness",      "distill_transfer", "programs"};

const std::vector<TaskSpec>& lift_tasks() {
  static const std::vector<TaskSpec> t = {TaskSpec::lift(Color::Red), TaskSpec::lift(Color::Green),
                                          TaskSpec::lift(Color::Blue)};
  return t;
}

std::vector<TaskSpec> stack_pairs() {
  const Color cs[] = {Color::Red, Color::Green, Color::Blue};
  std::vector<TaskSpec> out;
  for (Color top : cs)
    for (Color bottom : cs)
      if (top != bottom) out.push_back(TaskSpec::stack(top, bottom));
  return out;
}

std::string runs_dir(const StudySpec& spec) { return spec.out_dir + "/runs"; }

// Success at the first curve eval point at or after `episode` for `task`.
float curve_success_at(const trainer::LearningCurve& curve, int episode, const std::string& task) {
  const trainer::CurveRow* best = nullptr;
  for (const auto& r : curve.rows) {
    if (r.task != task || r.episode < episode) continue;
    if (best == nullptr || r.episode < best->episode) best = &r;
  }
  if (best == nullptr)
    throw Error("curve has no eval at episode >= " + std::to_string(episode) + " for '" + task +
                "'");
  return best->success;
}

trainer::EvalSpec cell_spec(int task_index, int n_episodes, int cell) {
  trainer::EvalSpec es;
  es.task_index = task_index;
  es.n_episodes = n_episodes;
  es.index_base = static_cast<std::uint64_t>(cell) * 1000000ULL;
  return es;
}

// Evaluates a single-task-trained policy on a different single task. Input
// construction is untouched: the baseline still sees its lone one-hot slot,
// the de dispatcher is simply handed the new instruction.
float eval_swapped_task(const trainer::TrainConfig& trained, const nn::ParamMap<float>& params,
                        const TaskSpec& task, int n_episodes, int cell) {
  trainer::TrainConfig cfg = trained;
  if (cfg.tasks.size() != 1) throw Error("task swap needs a single-task config");
  cfg.tasks = {task};
  return trainer::evaluate(cfg, params, cell_spec(0, n_episodes, cell)).success;
}

trainer::DistillConfig canonical_distill_config(const StudySpec& spec, std::uint64_t seed) {
  trainer::DistillConfig dc;
  dc.demo_task = TaskSpec::stack(Color::Red, Color::Blue);
  dc.scene.variant = sim2d::Variant::ThreeObjects;
  dc.n_demos = spec.demos;
  dc.eval_episodes = spec.eval_episodes;
  dc.eval_tasks = stack_pairs();
  dc.seed = seed;
  dc.out_dir = runs_dir(spec) + "/distill_s" + std::to_string(seed);
  return dc;
}

// Re-loads a finished distillation run if its on-disk config matches; runs it
// otherwise. The report is rebuilt from report.csv.
trainer::DistillResult distill_or_load(const trainer::DistillConfig& cfg) {
  namespace fs = std::filesystem;
  const std::string student_path = cfg.out_dir + "/student.bin";
  const std::string report_path = cfg.out_dir + "/report.csv";
  if (fs::exists(student_path) && fs::exists(report_path)) {
    nn::Checkpoint ck = nn::load_checkpoint(student_path);
    const std::string want = "kind=distill_student\npolicy:\n";
    const auto cut = ck.config.find("\ndistill:\n");
    if (ck.config.rfind(want, 0) == 0 && cut != std::string::npos &&
        ck.config.substr(cut + 10) == cfg.serialize()) {
      trainer::DistillResult res;
      res.params = std::move(ck.tensors);
      res.net = nn::PolicyConfig::deserialize(
          ck.config.substr(want.size(), cut - want.size()));
      for (const auto& line : split(read_file(report_path), '\n')) {
        const auto c = line.find(',');
        if (c == std::string::npos) continue;
        const std::string key = line.substr(0, c);
        const std::string val = line.substr(c + 1);
        if (key == "teacher_rate") res.report.teacher_rate = std::stof(val);
        else if (key == "demos") res.report.demos = std::stoi(val);
        else if (key == "records") res.report.records = std::stoi(val);
        else if (key == "epochs") res.report.epochs = std::stoi(val);
        else if (key == "holdout_mse") res.report.holdout_mse = std::stof(val);
        else if (key.rfind("eval.", 0) == 0)
          res.report.eval.emplace_back(key.substr(5), std::stof(val));
      }
      DEBENCH_LOG_INFO("expsuite: reusing distilled student in %s", cfg.out_dir.c_str());
      return res;
    }
  }
  return trainer::distill(cfg);
}

}  // namespace

// ---------------------------------------------------------------------------
// StudySpec

std::string_view study_name(Study s) { return kStudyNames[static_cast<int>(s)]; }

std::optional<Study> study_from_name(std::string_view s) {
  for (int i = 0; i < 6; ++i)
    if (s == kStudyNames[i]) return static_cast<Study>(i);
  return std::nullopt;
}

std::string StudySpec::serialize() const {
  std::ostringstream os;
  os << "study=" << study_name(study) << "\n";
  os << "seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << "\n";
  os << "episodes=" << episodes << "\n";
  os << "eval_episodes=" << eval_episodes << "\n";
  os << "demos=" << demos << "\n";
  os << "program_episodes=" << program_episodes << "\n";
  os << "workers=" << workers << "\n";
  os << "out_dir=" << out_dir << "\n";
  return os.str();
}

StudySpec StudySpec::deserialize(const std::string& text) {
  StudySpec spec;
  spec.seeds.clear();
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("study spec: bad line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "study") {
      const auto s = study_from_name(val);
      if (!s) throw Error("study spec: unknown study '" + val + "'");
      spec.study = *s;
    } else if (key == "seeds") {
      for (const auto& tok : split(val, ','))
        if (!tok.empty()) spec.seeds.push_back(std::stoull(tok));
    } else if (key == "episodes") {
      spec.episodes = std::stoi(val);
    } else if (key == "eval_episodes") {
      spec.eval_episodes = std::stoi(val);
    } else if (key == "demos") {
      spec.demos = std::stoi(val);
    } else if (key == "program_episodes") {
      spec.program_episodes = std::stoi(val);
    } else if (key == "workers") {
      spec.workers = std::stoi(val);
    } else if (key == "out_dir") {
      spec.out_dir = val;
    } else {
      throw Error("study spec: unknown key '" + key + "'");
    }
  }
  return spec;
}

void StudySpec::validate() const {
  if (seeds.size() < 3) throw Error("study spec: need at least 3 seeds for mean/min/max");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) throw Error("study spec: duplicate seed");
  if (episodes <= 0) throw Error("study spec: episodes must be positive");
  if (eval_episodes < 50) throw Error("study spec: eval_episodes < 50 (cell size floor)");
  if (demos <= 0) throw Error("study spec: demos must be positive");
  if (program_episodes < 50) throw Error("study spec: program_episodes < 50 (cell size floor)");
  if (workers < 1) throw Error("study spec: workers must be >= 1");
  if (out_dir.empty()) throw Error("study spec: out_dir required (runs are cached there)");
}

// ---------------------------------------------------------------------------
// EvalReport

std::string EvalReport::csv() const {
  std::ostringstream os;
  os << "study,condition,task,seed,n,success\n";
  for (const auto& r : rows)
    os << r.study << "," << r.condition << "," << r.task << "," << r.seed << "," << r.n << ","
       << fstr(r.success) << "\n";
  return os.str();
}

EvalReport EvalReport::from_csv(const std::string& text) {
  EvalReport rep;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "study,condition,task,seed,n,success")
    throw Error("report csv: bad header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 6) throw Error("report csv: bad row '" + line + "'");
    ReportRow r;
    r.study = cells[0];
    r.condition = cells[1];
    r.task = cells[2];
    r.seed = std::stoull(cells[3]);
    r.n = std::stoi(cells[4]);
    r.success = std::stof(cells[5]);
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

std::vector<AggregateRow> EvalReport::aggregate() const {
  std::vector<AggregateRow> out;
  std::vector<int> counts;
  for (const auto& r : rows) {
    AggregateRow* agg = nullptr;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].study == r.study && out[i].condition == r.condition && out[i].task == r.task) {
        agg = &out[i];
        counts[i] += 1;
        break;
      }
    }
    if (agg == nullptr) {
      out.push_back({r.study, r.condition, r.task, 0.f, r.success, r.success});
      counts.push_back(1);
      agg = &out.back();
    }
    agg->mean += r.success;
    agg->min = std::min(agg->min, r.success);
    agg->max = std::max(agg->max, r.success);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].mean /= static_cast<float>(counts[i]);
  return out;
}

float EvalReport::mean_success(std::string_view condition, std::string_view task) const {
  float sum = 0.f;
  int n = 0;
  for (const auto& r : rows) {
    if (!condition.empty() && r.condition != condition) continue;
    if (!task.empty() && r.task != task) continue;
    sum += r.success;
    n += 1;
  }
  if (n == 0) throw Error("mean_success: no rows match");
  return sum / static_cast<float>(n);
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "study,condition,task,mean,min,max\n";
  for (const auto& r : rows)
    os << r.study << "," << r.condition << "," << r.task << "," << fstr(r.mean) << ","
       << fstr(r.min) << "," << fstr(r.max) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared training recipe

trainer::TrainConfig study_train_config(trainer::Architecture arch,
                                        const std::vector<TaskSpec>& tasks,
                                        const sim2d::SceneConfig& scene, int episodes,
                                        int eval_episodes, std::uint64_t seed,
                                        const std::string& out_dir, int workers) {
  trainer::TrainConfig cfg;
  cfg.architecture = arch;
  cfg.channel = "mask_edge";
  cfg.scene = scene;
  cfg.tasks = tasks;
  cfg.episodes = episodes;
  cfg.workers = workers;
  cfg.flatten = true;
  cfg.eval_cadence = episodes;  // evaluate at the end (and at B inside 3B runs)
  cfg.eval_episodes = eval_episodes;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  return cfg;
}

// ---------------------------------------------------------------------------
// Studies

EvalReport run_single_transfer(const StudySpec& spec) {
  spec.validate();
  EvalReport rep;
  sim2d::SceneConfig scene;
  scene.variant = sim2d::Variant::ThreeObjects;
  int cell = 0;
  for (std::uint64_t seed : spec.seeds) {
    for (trainer::Architecture arch :
         {trainer::Architecture::De, trainer::Architecture::Baseline}) {
      const std::string name = std::string(trainer::architecture_name(arch)) + "_lift_red_s" +
                               std::to_string(seed);
      trainer::TrainConfig cfg =
          study_train_config(arch, {TaskSpec::lift(Color::Red)}, scene, spec.episodes,
                             spec.eval_episodes, seed, runs_dir(spec) + "/" + name, spec.workers);
      trainer::TrainResult res = trainer::train(cfg);
      for (const TaskSpec& task : lift_tasks()) {
        const float rate =
            eval_swapped_task(cfg, res.params, task, spec.eval_episodes, cell++);
        rep.rows.push_back({"single_transfer", std::string(trainer::architecture_name(arch)),
                            task.text(), seed, spec.eval_episodes, rate});
      }
    }
  }
  return rep;
}

EvalReport run_multitask(const StudySpec& spec) {
  spec.validate();
  EvalReport rep;
  sim2d::SceneConfig scene;
  scene.variant = sim2d::Variant::ThreeObjects;
  const int b = spec.episodes;
  for (std::uint64_t seed : spec.seeds) {
    for (trainer::Architecture arch :
         {trainer::Architecture::De, trainer::Architecture::Baseline}) {
      const std::string aname(trainer::architecture_name(arch));
      trainer::TrainConfig cfg = study_train_config(
          arch, lift_tasks(), scene, 3 * b, spec.eval_episodes, seed,
          runs_dir(spec) + "/" + aname + "_multitask_s" + std::to_string(seed), spec.workers);
      cfg.eval_cadence = b;  // curve rows at B, 2B, 3B
      trainer::TrainResult res = trainer::train(cfg);
      for (const TaskSpec& task : lift_tasks()) {
        rep.rows.push_back({"multitask", aname + "@B", task.text(), seed, spec.eval_episodes,
                            curve_success_at(res.curve, b, task.text())});
        rep.rows.push_back({"multitask", aname + "@3B", task.text(), seed, spec.eval_episodes,
                            curve_success_at(res.curve, 3 * b, task.text())});
      }
    }
    // Single-task reference at the same budget: multi-task costs de little.
    trainer::TrainConfig ref = study_train_config(
        trainer::Architecture::De, {TaskSpec::lift(Color::Red)}, scene, b, spec.eval_episodes,
        seed, runs_dir(spec) + "/de_lift_red_s" + std::to_string(seed), spec.workers);
    trainer::TrainResult res = trainer::train(ref);
    rep.rows.push_back({"multitask", "de_single@B", "lift red", seed, spec.eval_episodes,
                        curve_success_at(res.curve, b, "lift red")});
  }
  return rep;
}

EvalReport run_shapes_ablation(const StudySpec& spec) {
  spec.validate();
  EvalReport rep;
  sim2d::SceneConfig scene =
      sim2d::make_variant(sim2d::SceneConfig{}, sim2d::Variant::MultiShape);
  int cell = 0;
  for (std::uint64_t seed : spec.seeds) {
    const auto eval_all = [&](const trainer::TrainConfig& cfg, const nn::ParamMap<float>& params,
                              const std::string& condition) {
      for (std::size_t t = 0; t < lift_tasks().size(); ++t) {
        const float rate =
            trainer::evaluate(cfg, params,
                              cell_spec(static_cast<int>(t), spec.eval_episodes, cell++))
                .success;
        rep.rows.push_back({"shapes_ablation", condition, lift_tasks()[t].text(), seed,
                            spec.eval_episodes, rate});
      }
    };
    for (const char* channel : {"mask_edge", "pointer_edge", "mask_only", "pointer_only"}) {
      trainer::TrainConfig cfg = study_train_config(
          trainer::Architecture::De, lift_tasks(), scene, spec.episodes, spec.eval_episodes,
          seed, runs_dir(spec) + "/de_" + channel + "_shapes_s" + std::to_string(seed),
          spec.workers);
      cfg.channel = channel;
      trainer::TrainResult res = trainer::train(cfg);
      eval_all(cfg, res.params, channel);
    }
    trainer::TrainConfig cfg = study_train_config(
        trainer::Architecture::Baseline, lift_tasks(), scene, spec.episodes, spec.eval_episodes,
        seed, runs_dir(spec) + "/baseline_shapes_s" + std::to_string(seed), spec.workers);
    trainer::TrainResult res = trainer::train(cfg);
    eval_all(cfg, res.params, "baseline");
  }
  return rep;
}

EvalReport run_robustness(const StudySpec& spec) {
  spec.validate();
  EvalReport rep;
  sim2d::SceneConfig scene;
  scene.variant = sim2d::Variant::ThreeObjects;
  const sim2d::Variant variants[] = {sim2d::Variant::ThreeObjects, sim2d::Variant::OneCube,
                                     sim2d::Variant::FourCubes, sim2d::Variant::Recolor,
                                     sim2d::Variant::BackgroundTextured};
  int cell = 0;
  for (std::uint64_t seed : spec.seeds) {
    for (trainer::Architecture arch :
         {trainer::Architecture::De, trainer::Architecture::Baseline}) {
      // Same run naming as single_transfer, so finished checkpoints are
      // picked up instead of retrained.
      const std::string name = std::string(trainer::architecture_name(arch)) + "_lift_red_s" +
                               std::to_string(seed);
      trainer::TrainConfig cfg =
          study_train_config(arch, {TaskSpec::lift(Color::Red)}, scene, spec.episodes,
                             spec.eval_episodes, seed, runs_dir(spec) + "/" + name, spec.workers);
      trainer::TrainResult res = trainer::train(cfg);
      for (sim2d::Variant v : variants) {
        trainer::EvalSpec es = cell_spec(0, spec.eval_episodes, cell++);
        es.scene = sim2d::make_variant(cfg.scene, v);
        rep.rows.push_back({"robustness", std::string(trainer::architecture_name(arch)),
                            std::string(sim2d::variant_name(v)), seed, spec.eval_episodes,
                            trainer::evaluate(cfg, res.params, es).success});
      }
    }
  }
  return rep;
}

EvalReport run_distill_transfer(const StudySpec& spec) {
  spec.validate();
  EvalReport rep;
  int cell = 0;
  for (std::uint64_t seed : spec.seeds) {
    const trainer::DistillConfig dc = canonical_distill_config(spec, seed);
    trainer::DistillResult res = distill_or_load(dc);
    rep.rows.push_back({"distill_transfer", "teacher", dc.demo_task.text(), seed,
                        res.report.demos, res.report.teacher_rate});
    for (const auto& [task, rate] : res.report.eval)
      rep.rows.push_back(
          {"distill_transfer", "cubes", task, seed, spec.eval_episodes, rate});
    // The same student dropped into multi-shape scenes: unseen shape pools.
    for (const TaskSpec& pair : stack_pairs()) {
      trainer::TrainConfig ecfg;
      ecfg.architecture = trainer::Architecture::De;
      ecfg.channel = dc.channel;
      ecfg.scene = sim2d::make_variant(dc.scene, sim2d::Variant::MultiShape);
      ecfg.tasks = {pair};
      ecfg.seed = dc.seed;
      const float rate =
          trainer::evaluate(ecfg, res.params, cell_spec(0, spec.eval_episodes, cell++)).success;
      rep.rows.push_back(
          {"distill_transfer", "multi_shape", pair.text(), seed, spec.eval_episodes, rate});
    }
  }
  return rep;
}

EvalReport run_programs(const StudySpec& spec) {
  spec.validate();
  EvalReport rep;
  struct ProgramCase {
    const char* condition;
    const char* text;
    sim2d::Variant variant;
  };
  const ProgramCase cases[] = {
      {"two_towers", "two_towers red blue green yellow", sim2d::Variant::FourCubes},
      {"triple_stack", "triple_stack red blue green", sim2d::Variant::ThreeObjects},
  };
  for (std::uint64_t seed : spec.seeds) {
    const trainer::DistillConfig dc = canonical_distill_config(spec, seed);
    trainer::DistillResult student = distill_or_load(dc);
    const codec::ChannelConfig channel = *codec::ChannelConfig::from_name(dc.channel);
    const dispatcher::ExecutorFn executor = [&](const codec::Message& msg, const TaskSpec&) {
      const nn::PolicyOutput out = nn::executor_forward(msg, student.params, student.net);
      Rng unused(0);
      const nn::ActionSample a = nn::sample_action(out, unused, /*greedy=*/true);
      return sim2d::Action(a.action[0], a.action[1], a.action[2]);
    };
    int case_idx = 0;
    for (const ProgramCase& pc : cases) {
      const TaskSpec program = dispatcher::parse_task(pc.text);
      sim2d::SceneConfig scene = sim2d::make_variant(dc.scene, pc.variant);
      sim2d::Env env(scene, program);
      const int stages = static_cast<int>(program.stages.size());
      int overall = 0, destroyed = 0, incomplete = 0;
      std::vector<int> stage_ok(stages, 0);
      for (int e = 0; e < spec.program_episodes; ++e) {
        const std::uint64_t ep_seed = derive_seed(
            seed, SeedStream::Eval,
            1000000ULL * static_cast<std::uint64_t>(100 + case_idx) + static_cast<std::uint64_t>(e));
        const dispatcher::ProgramOutcome out =
            dispatcher::run_program(program, env, channel, executor, ep_seed);
        overall += out.success ? 1 : 0;
        bool all_handoff = true;
        for (int i = 0; i < stages; ++i) {
          stage_ok[i] += out.stage_success[i] ? 1 : 0;
          all_handoff = all_handoff && out.stage_success_at_handoff[i];
        }
        if (!out.success) (all_handoff ? destroyed : incomplete) += 1;
      }
      const float n = static_cast<float>(spec.program_episodes);
      const auto push = [&](const std::string& task, int count) {
        rep.rows.push_back({"programs", pc.condition, task, seed, spec.program_episodes,
                            static_cast<float>(count) / n});
      };
      push("overall", overall);
      for (int i = 0; i < stages; ++i) push("stage " + std::to_string(i + 1), stage_ok[i]);
      push("failure: tower destroyed", destroyed);
      push("failure: stage incomplete", incomplete);
      ++case_idx;
    }
  }
  return rep;
}

EvalReport run_study(const StudySpec& spec) {
  spec.validate();
  EvalReport rep;
  switch (spec.study) {
    case Study::SingleTransfer: rep = run_single_transfer(spec); break;
    case Study::Multitask: rep = run_multitask(spec); break;
    case Study::ShapesAblation: rep = run_shapes_ablation(spec); break;
    case Study::Robustness: rep = run_robustness(spec); break;
    case Study::DistillTransfer: rep = run_distill_transfer(spec); break;
    case Study::Programs: rep = run_programs(spec); break;
  }
  emit_report({rep}, spec.out_dir);
  return rep;
}

// ---------------------------------------------------------------------------
// Emission

void emit_report(const std::vector<EvalReport>& reports, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<AggregateRow> all_aggregates;
  for (const auto& rep : reports) {
    if (rep.rows.empty()) continue;
    const std::string study = rep.rows[0].study;
    write_file(dir + "/" + study + ".csv", rep.csv());

    const auto aggs = rep.aggregate();
    all_aggregates.insert(all_aggregates.end(), aggs.begin(), aggs.end());

    plot::BarChart chart;
    chart.title = study;
    chart.ylabel = "success";
    std::vector<std::string> tasks;
    for (const auto& a : aggs) {
      if (std::find(chart.series.begin(), chart.series.end(), a.condition) == chart.series.end())
        chart.series.push_back(a.condition);
      if (std::find(tasks.begin(), tasks.end(), a.task) == tasks.end()) tasks.push_back(a.task);
    }
    for (const auto& t : tasks) {
      plot::BarGroup g;
      g.label = t;
      for (const auto& c : chart.series) {
        plot::Bar bar;  // absent cells stay zero-height
        for (const auto& a : aggs)
          if (a.condition == c && a.task == t) bar = {a.mean, a.min, a.max};
        g.bars.push_back(bar);
      }
      chart.groups.push_back(std::move(g));
    }
    const int width = std::max(900, 120 + 160 * static_cast<int>(chart.groups.size()));
    pngio::write_png(dir + "/" + study + ".png", plot::render(chart, width, 480));
  }
  write_file(dir + "/aggregate.csv", aggregate_csv(all_aggregates));
}

}  // namespace debench::expsuite

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

#include "debench/common.hpp"
#include "debench/expsuite.hpp"

using namespace debench;
using expsuite::EvalReport;
using expsuite::ReportRow;
using expsuite::Study;
using expsuite::StudySpec;

namespace {

std::string temp_dir() {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("debench_expsuite_" + std::to_string(++counter));
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

EvalReport sample_report() {
  EvalReport rep;
  rep.rows = {
      {"single_transfer", "de", "lift red", 0, 50, 0.9f},
      {"single_transfer", "de", "lift red", 1, 50, 0.8f},
      {"single_transfer", "de", "lift red", 2, 50, 1.0f},
      {"single_transfer", "de", "lift green", 0, 50, 0.7f},
      {"single_transfer", "de", "lift green", 1, 50, 0.5f},
      {"single_transfer", "de", "lift green", 2, 50, 0.6f},
      {"single_transfer", "baseline", "lift red", 0, 50, 0.1f},
      {"single_transfer", "baseline", "lift red", 1, 50, 0.3f},
      {"single_transfer", "baseline", "lift red", 2, 50, 0.2f},
  };
  return rep;
}

}  // namespace

TEST_CASE("study names round trip") {
  for (int i = 0; i <= static_cast<int>(Study::Programs); ++i) {
    const auto s = static_cast<Study>(i);
    const auto back = expsuite::study_from_name(expsuite::study_name(s));
    REQUIRE(back.has_value());
    CHECK(*back == s);
  }
  CHECK(expsuite::study_name(Study::SingleTransfer) == "single_transfer");
  CHECK(!expsuite::study_from_name("no_such_study").has_value());
}

TEST_CASE("study spec serialization round trips") {
  StudySpec spec;
  spec.study = Study::DistillTransfer;
  spec.seeds = {7, 11, 13, 17};
  spec.episodes = 1234;
  spec.eval_episodes = 75;
  spec.demos = 150;
  spec.program_episodes = 60;
  spec.workers = 2;
  spec.out_dir = "/tmp/somewhere";

  const StudySpec back = StudySpec::deserialize(spec.serialize());
  CHECK(back.study == spec.study);
  CHECK(back.seeds == spec.seeds);
  CHECK(back.episodes == spec.episodes);
  CHECK(back.eval_episodes == spec.eval_episodes);
  CHECK(back.demos == spec.demos);
  CHECK(back.program_episodes == spec.program_episodes);
  CHECK(back.workers == spec.workers);
  CHECK(back.out_dir == spec.out_dir);
}

TEST_CASE("study spec validation rejects bad configurations") {
  StudySpec ok;
  ok.out_dir = "/tmp/x";
  CHECK_NOTHROW(ok.validate());

  StudySpec bad = ok;
  bad.seeds = {0, 1};  // mean/min/max needs at least 3 seeds
  CHECK_THROWS_AS(bad.validate(), Error);

  bad = ok;
  bad.seeds = {0, 1, 1};
  CHECK_THROWS_AS(bad.validate(), Error);

  bad = ok;
  bad.episodes = 0;
  CHECK_THROWS_AS(bad.validate(), Error);

  bad = ok;
  bad.eval_episodes = 49;  // reporting contract: at least 50 per cell
  CHECK_THROWS_AS(bad.validate(), Error);

  bad = ok;
  bad.program_episodes = 49;
  CHECK_THROWS_AS(bad.validate(), Error);

  bad = ok;
  bad.demos = 0;
  CHECK_THROWS_AS(bad.validate(), Error);

  bad = ok;
  bad.workers = 0;
  CHECK_THROWS_AS(bad.validate(), Error);

  bad = ok;
  bad.out_dir.clear();
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("report csv round trips") {
  const EvalReport rep = sample_report();
  const std::string text = rep.csv();
  CHECK(text.rfind("study,condition,task,seed,n,success\n", 0) == 0);

  const EvalReport back = EvalReport::from_csv(text);
  REQUIRE(back.rows.size() == rep.rows.size());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(back.rows[i].study == rep.rows[i].study);
    CHECK(back.rows[i].condition == rep.rows[i].condition);
    CHECK(back.rows[i].task == rep.rows[i].task);
    CHECK(back.rows[i].seed == rep.rows[i].seed);
    CHECK(back.rows[i].n == rep.rows[i].n);
    CHECK(back.rows[i].success == doctest::Approx(rep.rows[i].success));
  }
}

TEST_CASE("aggregate computes mean/min/max per cell in first-appearance order") {
  const auto agg = sample_report().aggregate();
  REQUIRE(agg.size() == 3);

  CHECK(agg[0].condition == "de");
  CHECK(agg[0].task == "lift red");
  CHECK(agg[0].mean == doctest::Approx(0.9f));  // (0.9 + 0.8 + 1.0) / 3
  CHECK(agg[0].min == doctest::Approx(0.8f));
  CHECK(agg[0].max == doctest::Approx(1.0f));

  CHECK(agg[1].condition == "de");
  CHECK(agg[1].task == "lift green");
  CHECK(agg[1].mean == doctest::Approx(0.6f));
  CHECK(agg[1].min == doctest::Approx(0.5f));
  CHECK(agg[1].max == doctest::Approx(0.7f));

  CHECK(agg[2].condition == "baseline");
  CHECK(agg[2].mean == doctest::Approx(0.2f));
  CHECK(agg[2].min == doctest::Approx(0.1f));
  CHECK(agg[2].max == doctest::Approx(0.3f));

  const std::string text = expsuite::aggregate_csv(agg);
  CHECK(text.rfind("study,condition,task,mean,min,max\n", 0) == 0);
  // One header plus one line per aggregate row.
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

TEST_CASE("mean_success filters by condition and task") {
  const EvalReport rep = sample_report();
  CHECK(rep.mean_success() == doctest::Approx((0.9f + 0.8f + 1.0f + 0.7f + 0.5f + 0.6f +
                                               0.1f + 0.3f + 0.2f) /
                                              9.f));
  CHECK(rep.mean_success("baseline") == doctest::Approx(0.2f));
  CHECK(rep.mean_success("de", "lift green") == doctest::Approx(0.6f));
  CHECK(rep.mean_success("", "lift red") == doctest::Approx((0.9f + 0.8f + 1.0f + 0.1f +
                                                             0.3f + 0.2f) /
                                                            6.f));
  // No matching rows is a report bug, not a zero.
  CHECK_THROWS_AS(rep.mean_success("nonexistent"), Error);
}

TEST_CASE("emit_report writes per-study csv, aggregate csv, and charts") {
  const std::string dir = temp_dir();
  const EvalReport rep = sample_report();
  expsuite::emit_report({rep}, dir);

  const auto csv_path = dir + "/single_transfer.csv";
  const auto agg_path = dir + "/aggregate.csv";
  const auto png_path = dir + "/single_transfer.png";
  REQUIRE(std::filesystem::exists(csv_path));
  REQUIRE(std::filesystem::exists(agg_path));
  REQUIRE(std::filesystem::exists(png_path));

  CHECK(slurp(csv_path) == rep.csv());
  CHECK(slurp(agg_path) == expsuite::aggregate_csv(rep.aggregate()));

  // PNG signature.
  const std::string png = slurp(png_path);
  REQUIRE(png.size() > 8);
  CHECK(static_cast<unsigned char>(png[0]) == 0x89);
  CHECK(png.substr(1, 3) == "PNG");

  // Re-emission is byte-identical (reports are deterministic artifacts).
  const std::string first_csv = slurp(csv_path);
  const std::string first_png = slurp(png_path);
  expsuite::emit_report({rep}, dir);
  CHECK(slurp(csv_path) == first_csv);
  CHECK(slurp(png_path) == first_png);
}

TEST_CASE("emit_report with no rows still writes the aggregate header") {
  const std::string dir = temp_dir();
  expsuite::emit_report({}, dir);
  CHECK(slurp(dir + "/aggregate.csv") == "study,condition,task,mean,min,max\n");
}

TEST_CASE("study_train_config pins the shared recipe") {
  const std::vector<TaskSpec> tasks = {TaskSpec::lift(Color::Red)};
  sim2d::SceneConfig scene;
  const auto de = expsuite::study_train_config(trainer::Architecture::De, tasks, scene,
                                               5000, 50, 3, "/tmp/run_de", 1);
  const auto bl = expsuite::study_train_config(trainer::Architecture::Baseline, tasks,
                                               scene, 5000, 50, 3, "/tmp/run_bl", 1);

  CHECK(de.architecture == trainer::Architecture::De);
  CHECK(bl.architecture == trainer::Architecture::Baseline);
  CHECK(de.channel == "mask_edge");
  CHECK(de.flatten);
  CHECK(de.episodes == 5000);
  CHECK(de.eval_episodes == 50);
  CHECK(de.seed == 3);
  CHECK(de.out_dir == "/tmp/run_de");

  // The two architectures must differ only in input construction: identical
  // optimizer and rollout hyperparameters.
  CHECK(de.lr == bl.lr);
  CHECK(de.entropy_coef == bl.entropy_coef);
  CHECK(de.batch_episodes == bl.batch_episodes);
  CHECK(de.gamma == bl.gamma);
  CHECK(de.lam == bl.lam);
  CHECK(de.flatten == bl.flatten);
}

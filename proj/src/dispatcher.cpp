#include "debench/dispatcher.hpp"

#include <utility>

#include "debench/common.hpp"

namespace debench::dispatcher {

namespace {

struct Token {
  std::string text;
  std::size_t pos;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    if (i >= text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    out.push_back({text.substr(start, i - start), start});
  }
  return out;
}

}  // namespace

TaskSpec parse_task(const std::string& text) {
  const auto tok = tokenize(text);
  if (tok.empty()) throw ParseError("empty task", 0);

  const auto color_at = [&](std::size_t i) {
    if (i >= tok.size()) throw ParseError("expected a color", text.size());
    const auto c = color_from_name(tok[i].text);
    if (!c) throw ParseError("unknown color '" + tok[i].text + "'", tok[i].pos);
    return *c;
  };
  const auto expect_end = [&](std::size_t n) {
    if (tok.size() > n)
      throw ParseError("unexpected token '" + tok[n].text + "'", tok[n].pos);
  };
  const auto stage = [](Color top, Color bottom) {
    TaskSpec::Stage s;
    s.kind = TaskSpec::Kind::Stack;
    s.selectors = {top, bottom};
    s.step_budget = sim2d::kEpisodeLimit;
    return s;
  };

  const std::string& head = tok[0].text;
  if (head == "lift") {
    const Color c = color_at(1);
    expect_end(2);
    return TaskSpec::lift(c);
  }
  if (head == "stack") {
    const Color top = color_at(1);
    if (tok.size() < 3 || tok[2].text != "on")
      throw ParseError("expected 'on'", tok.size() > 2 ? tok[2].pos : text.size());
    const Color bottom = color_at(3);
    expect_end(4);
    return TaskSpec::stack(top, bottom);
  }
  if (head == "two_towers") {
    const Color c1 = color_at(1), c2 = color_at(2), c3 = color_at(3), c4 = color_at(4);
    expect_end(5);
    return TaskSpec::program({stage(c1, c2), stage(c3, c4)});
  }
  if (head == "triple_stack") {
    const Color c1 = color_at(1), c2 = color_at(2), c3 = color_at(3);
    expect_end(4);
    return TaskSpec::program({stage(c1, c2), stage(c3, c1)});
  }
  throw ParseError("unknown task '" + head + "'", tok[0].pos);
}

IdentifyResult identify_objects(const TaskSpec& task, const sim2d::Observation& obs) {
  if (task.is_program())
    throw Error("identify_objects: program stages must be dispatched one at a time");
  IdentifyResult out;
  out.masks.reserve(task.selectors.size());
  for (const Color c : task.selectors) {
    std::vector<Plane> per_camera;
    float total = 0.0f;
    per_camera.reserve(obs.cameras.size());
    for (const auto& img : obs.cameras) {
      per_camera.push_back(codec::mask_filter(img, c));
      total += per_camera.back().sum();
    }
    out.empty.push_back(total == 0.0f);
    if (out.empty.back())
      DEBENCH_LOG_WARN("dispatcher: selector '%s' matched no pixels",
                       color_name(c).data());  // string literal, NUL-terminated
    out.masks.push_back(std::move(per_camera));
  }
  return out;
}

codec::Message dispatch(const TaskSpec& task, const sim2d::Observation& obs,
                        const codec::ChannelConfig& channel) {
  if (task.is_program())
    throw Error("dispatch: program stages must be dispatched one at a time");
  return codec::assemble_message(task, obs, channel);
}

ProgramOutcome run_program(const TaskSpec& program, sim2d::Env& env,
                           const codec::ChannelConfig& channel,
                           const ExecutorFn& executor, std::uint64_t seed) {
  if (!program.is_program()) throw Error("run_program wants a program task");
  env.set_task(program);
  env.reset(seed);

  ProgramOutcome out;
  for (std::size_t i = 0; i < program.stages.size(); ++i) {
    const TaskSpec stage = program.stage_task(static_cast<int>(i));
    env.set_task(stage);
    for (int t = 0; t < program.stages[i].step_budget; ++t) {
      const codec::Message msg = dispatch(stage, env.obs(), channel);
      env.step(executor(msg, stage));
      ++out.steps;
    }
    out.stage_success_at_handoff.push_back(sim2d::success(env.state(), stage));
  }

  out.success = true;
  for (std::size_t i = 0; i < program.stages.size(); ++i) {
    const bool ok = sim2d::success(env.state(), program.stage_task(static_cast<int>(i)));
    out.stage_success.push_back(ok);
    out.success = out.success && ok;
  }
  return out;
}

}  // namespace debench::dispatcher

#ifndef DEBENCH_TASK_HPP_
#define DEBENCH_TASK_HPP_

#include <map>
#include <string>
#include <vector>

#include "debench/common.hpp"

namespace debench {

// Parsed task command. Programs are flat lists of (lift|stack, budget) stages;
// nesting deeper than one level is not representable by construction.
struct TaskSpec {
  enum class Kind { Lift, Stack, Program };

  struct Stage {
    Kind kind = Kind::Lift;                 // Lift or Stack only
    std::vector<Color> selectors;           // lift: [target]; stack: [top, bottom]
    int step_budget = 0;
  };

  Kind kind = Kind::Lift;
  std::vector<Color> selectors;             // empty for programs
  std::vector<Stage> stages;                // empty for lift/stack

  static TaskSpec lift(Color target) {
    TaskSpec t;
    t.kind = Kind::Lift;
    t.selectors = {target};
    return t;
  }

  static TaskSpec stack(Color top, Color bottom) {
    TaskSpec t;
    t.kind = Kind::Stack;
    t.selectors = {top, bottom};
    return t;
  }

  static TaskSpec program(std::vector<Stage> stages) {
    TaskSpec t;
    t.kind = Kind::Program;
    t.stages = std::move(stages);
    return t;
  }

  // Number of argument objects carried over the channel.
  int arity() const { return kind == Kind::Stack ? 2 : (kind == Kind::Lift ? 1 : 0); }

  bool is_program() const { return kind == Kind::Program; }

  // Executor identifier on the wire ("lift" / "stack").
  std::string executor_id() const {
    switch (kind) {
      case Kind::Lift: return "lift";
      case Kind::Stack: return "stack";
      case Kind::Program: return "program";
    }
    return "?";
  }

  // All selectors the scene must be able to satisfy, stages included.
  std::vector<Color> all_selectors() const {
    if (!is_program()) return selectors;
    std::vector<Color> out;
    for (const auto& s : stages)
      for (Color c : s.selectors) out.push_back(c);
    return out;
  }

  TaskSpec stage_task(int i) const {
    TaskSpec t;
    t.kind = stages[i].kind;
    t.selectors = stages[i].selectors;
    return t;
  }

  // Canonical task string in the CLI grammar (lift/stack only for stages).
  std::string text() const;

  bool operator==(const TaskSpec& o) const;
};

inline bool operator==(const TaskSpec::Stage& a, const TaskSpec::Stage& b) {
  return a.kind == b.kind && a.selectors == b.selectors && a.step_budget == b.step_budget;
}

inline bool TaskSpec::operator==(const TaskSpec& o) const {
  return kind == o.kind && selectors == o.selectors && stages == o.stages;
}

// Applies a color mapping to every selector, stages included; colors absent
// from the map are kept. A recolored world plus a recolored instruction is the
// same problem wearing different paint — the evaluation utility behind the
// transfer studies.
inline TaskSpec recolor_task(TaskSpec task, const std::map<Color, Color>& mapping) {
  const auto map_one = [&](Color c) {
    const auto it = mapping.find(c);
    return it == mapping.end() ? c : it->second;
  };
  for (Color& c : task.selectors) c = map_one(c);
  for (auto& st : task.stages)
    for (Color& c : st.selectors) c = map_one(c);
  return task;
}

inline std::string TaskSpec::text() const {
  switch (kind) {
    case Kind::Lift:
      return "lift " + std::string(color_name(selectors[0]));
    case Kind::Stack:
      return "stack " + std::string(color_name(selectors[0])) + " on " +
             std::string(color_name(selectors[1]));
    case Kind::Program: {
      std::string s = "program";
      for (const auto& st : stages) {
        TaskSpec t;
        t.kind = st.kind;
        t.selectors = st.selectors;
        s += " [" + t.text() + " : " + std::to_string(st.step_budget) + "]";
      }
      return s;
    }
  }
  return "?";
}

}  // namespace debench

#endif  // DEBENCH_TASK_HPP_

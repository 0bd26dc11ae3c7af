#ifndef DEBENCH_DISPATCHER_HPP_
#define DEBENCH_DISPATCHER_HPP_

#include <functional>
#include <string>
#include <vector>

#include "debench/codec.hpp"
#include "debench/sim2d.hpp"
#include "debench/task.hpp"

namespace debench::dispatcher {

// Task grammar:
//   lift <color>
//   stack <color> on <color>
//   two_towers <c1> <c2> <c3> <c4>    -> [stack c1 on c2, stack c3 on c4]
//   triple_stack <c1> <c2> <c3>       -> [stack c1 on c2, stack c3 on c1]
// Program stages get a default budget of one episode limit each.
// Throws ParseError carrying the byte offset of the offending token.
TaskSpec parse_task(const std::string& text);

struct IdentifyResult {
  std::vector<std::vector<Plane>> masks;  // [selector][camera]
  std::vector<bool> empty;                // selector matched nothing anywhere
};

// Color segmentation of the task's arguments. An empty match is a warning,
// not an error: the all-zero mask is emitted and the executor sees it.
IdentifyResult identify_objects(const TaskSpec& task, const sim2d::Observation& obs);

// identify_objects + channel encoding; stateless and pure in (task, obs,
// channel). Rejects program tasks (those are sequenced by run_program).
codec::Message dispatch(const TaskSpec& task, const sim2d::Observation& obs,
                        const codec::ChannelConfig& channel);

struct ProgramOutcome {
  std::vector<bool> stage_success;  // each stage predicate on the final state
  // Each stage predicate at the moment its step budget expired; true here but
  // false above means a later stage wrecked the result.
  std::vector<bool> stage_success_at_handoff;
  bool success = false;  // all final predicates simultaneously
  int steps = 0;
};

// The executor under sequencing: maps a channel message to an action. The
// current stage task rides along for oracle executors used in tests; learned
// executors must ignore it.
using ExecutorFn =
    std::function<sim2d::Action(const codec::Message&, const TaskSpec& stage)>;

// Runs the program's stages back to back in one continuous episode: each
// stage gets exactly its step budget, then control passes on regardless of
// intermediate success. All stage predicates are evaluated together on the
// final state, so a later stage that wrecks an earlier stack forfeits the
// program even if the predicate held mid-episode.
ProgramOutcome run_program(const TaskSpec& program, sim2d::Env& env,
                           const codec::ChannelConfig& channel,
                           const ExecutorFn& executor, std::uint64_t seed);

}  // namespace debench::dispatcher

#endif  // DEBENCH_DISPATCHER_HPP_

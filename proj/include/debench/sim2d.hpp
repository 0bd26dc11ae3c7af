#ifndef DEBENCH_SIM2D_HPP_
#define DEBENCH_SIM2D_HPP_

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "debench/common.hpp"
#include "debench/image.hpp"
#include "debench/task.hpp"

namespace debench::sim2d {

// ---------------------------------------------------------------------------
// World geometry. The workspace is a fixed 32x32-unit side view (x horizontal,
// z vertical, z = 0 the floor); at the default 32x32 image one pixel covers
// one world unit.

constexpr float kWorldW = 32.0f;
constexpr float kWorldH = 32.0f;
constexpr int kEpisodeLimit = 100;
constexpr float kLiftThreshold = 0.4f * kWorldH;
constexpr float kGripSpeed = 2.0f;        // world units per step at |dx| = 1
constexpr float kApertureRate = 0.5f;     // aperture change per step at |grip| = 1
constexpr float kGraspTolerance = 1.5f;   // around the shape grasp point
constexpr float kSupportMinOverlap = 0.5f;  // footprint overlap to rest on an object
constexpr float kLivingCost = 0.005f;     // per-step cost; finishing early pays

enum class Shape : int { Square = 0, Rectangle, Triangle, Ell };

std::string_view shape_name(Shape s);
std::optional<Shape> shape_from_name(std::string_view s);

enum class Variant : int {
  ThreeObjects = 0,
  OneCube,
  FourCubes,
  Recolor,
  BackgroundTextured,
  MultiShape,
};

std::string_view variant_name(Variant v);
std::optional<Variant> variant_from_name(std::string_view s);

// resting_on encoding
constexpr int kFloor = -1;
constexpr int kHeld = -2;
constexpr int kNone = -1;  // gripper.held when empty

struct ObjectState {
  int id = 0;
  Color color = Color::Red;
  Shape shape = Shape::Square;
  float x = 0.f;       // center x
  float z = 0.f;       // base z
  float width = 0.f;
  float height = 0.f;
  int resting_on = kFloor;  // kFloor, kHeld, or supporting object id

  float top() const { return z + height; }
  float left() const { return x - 0.5f * width; }
  float right() const { return x + 0.5f * width; }
};

// Grasp point of a shape, relative to (center x, base z). Squares and
// rectangles are pinched at the top center, triangles at the apex, ells at the
// inner corner of the notch.
Eigen::Vector2f grasp_offset(Shape shape, float width, float height);
inline Eigen::Vector2f grasp_point(const ObjectState& o) {
  return Eigen::Vector2f(o.x, o.z) + grasp_offset(o.shape, o.width, o.height);
}

struct GripperState {
  float x = 0.f;
  float z = 0.f;
  float aperture = 1.f;  // 0 closed .. 1 open
  int held = kNone;
};

struct SceneConfig {
  Variant variant = Variant::ThreeObjects;
  int image_size = 32;   // square images, 32..64
  int cameras = 1;
  bool pixel_noise = false;
  float noise_sigma = 0.02f;

  // Shapes an object of a given color may take; empty pool means square.
  std::map<Color, std::vector<Shape>> shape_pool;

  int object_count() const {
    switch (variant) {
      case Variant::OneCube: return 1;
      case Variant::FourCubes: return 4;
      default: return 3;
    }
  }

  bool textured_background() const { return variant == Variant::BackgroundTextured; }
  bool multi_shape() const { return variant == Variant::MultiShape; }

  std::string serialize() const;                       // key=value lines
  static SceneConfig deserialize(const std::string&);  // strict, rejects unknown keys
};

struct SceneState {
  SceneConfig config;
  std::vector<ObjectState> objects;
  GripperState gripper;
  int step = 0;
  bool success_latched = false;
  float bg_phase = 0.f;             // textured-background phase, drawn at reset
  std::uint64_t noise_salt = 0;     // per-episode pixel-noise seed, drawn at reset

  const ObjectState* find(int id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
};

struct Observation {
  std::vector<Image> cameras;
  Eigen::Vector4f proprio;  // gripper x, z in [-1,1], aperture, held flag
};

struct Action {
  Eigen::Vector3f v = Eigen::Vector3f::Zero();  // dx, dz, grip, each in [-1,1]
  Action() = default;
  Action(float dx, float dz, float grip) : v(dx, dz, grip) {}
  float dx() const { return v[0]; }
  float dz() const { return v[1]; }
  float grip() const { return v[2]; }
};

struct StepResult {
  SceneState state;
  Observation obs;
  float reward = 0.f;
  bool done = false;
};

// ---------------------------------------------------------------------------
// Operations

// Deterministic scene construction. Objects are placed non-overlapping on the
// floor; colors are assigned so every selector of `task` is satisfiable.
// Throws UnsatisfiableTask otherwise.
std::pair<SceneState, Observation> reset(const SceneConfig& config, const TaskSpec& task,
                                         std::uint64_t seed);

// Pure kinematic transition. Actions are clamped, never rejected.
StepResult step(const SceneState& state, const Action& action, const TaskSpec& task);

// Success predicate for lift/stack tasks (programs are judged by the
// dispatcher).
bool success(const SceneState& state, const TaskSpec& task);

SceneConfig make_variant(SceneConfig base, Variant variant);

// Analytic ground-truth-state controller used as distillation teacher and as
// its own test oracle.
Action scripted_expert(const SceneState& state, const TaskSpec& task);

// Occlusion-aware ground-truth mask: 1 exactly where the renderer painted the
// object's body in the given camera. Throws UnknownObject.
Plane oracle_mask(const SceneState& state, int object_id, int camera = 0);

// Pure function of the state: pixel noise, when enabled, is keyed off
// (noise_salt, step, camera), so the same state always renders the same bytes.
Observation render(const SceneState& state);
// As render(), but without pixel noise; used by oracle_mask.
Observation render_clean(const SceneState& state);

// Applies a color mapping to all objects; evaluation utility for the
// recoloring-invariance studies. Colors absent from the map are kept.
SceneState recolor_objects(SceneState state, const std::map<Color, Color>& mapping);

// Byte-exact serialization of the full world state (determinism checks).
std::string serialize_state(const SceneState& state);

// ---------------------------------------------------------------------------
// Convenience wrapper owning one episode's state; success latching and the
// step counter live in SceneState itself, so this is a thin handle.

class Env {
 public:
  Env(SceneConfig config, TaskSpec task) : config_(std::move(config)), task_(std::move(task)) {}

  const Observation& reset(std::uint64_t seed) {
    auto [s, o] = sim2d::reset(config_, task_, seed);
    state_ = std::move(s);
    obs_ = std::move(o);
    return obs_;
  }

  // Returns (reward, done); observation available via obs().
  std::pair<float, bool> step(const Action& a) {
    StepResult r = sim2d::step(state_, a, task_);
    state_ = std::move(r.state);
    obs_ = std::move(r.obs);
    return {r.reward, r.done};
  }

  const SceneState& state() const { return state_; }
  SceneState& mutable_state() { return state_; }
  const Observation& obs() const { return obs_; }
  const TaskSpec& task() const { return task_; }
  void set_task(TaskSpec t) { task_ = std::move(t); }
  const SceneConfig& config() const { return config_; }

 private:
  SceneConfig config_;
  TaskSpec task_;
  SceneState state_;
  Observation obs_;
};

}  // namespace debench::sim2d

#endif  // DEBENCH_SIM2D_HPP_

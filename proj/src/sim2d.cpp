#include "debench/sim2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace debench::sim2d {

namespace {

constexpr float kGripperXMin = 1.5f;
constexpr float kGripperXMax = kWorldW - 1.5f;
constexpr float kGripperZMin = 1.0f;
constexpr float kGripperZMax = 26.0f;
constexpr float kHomeX = kWorldW * 0.5f;
constexpr float kHomeZ = kGripperZMax;
constexpr float kPlacementGap = 1.5f;  // min horizontal gap between footprints
constexpr float kPlacementMargin = 1.5f;
const float kDiag = std::sqrt(kWorldW * kWorldW + kWorldH * kWorldH);

const Eigen::Vector3f kGripperColor(0.55f, 0.55f, 0.55f);
const Eigen::Vector3f kFloorColor(0.30f, 0.30f, 0.30f);
constexpr float kFloorHeight = 0.75f;

constexpr int kOwnerBackground = -1;
constexpr int kOwnerGripper = -2;

struct ShapeDims {
  float w, h;
};

ShapeDims shape_dims(Shape s) {
  switch (s) {
    case Shape::Square: return {4.f, 4.f};
    case Shape::Rectangle: return {6.f, 3.f};
    case Shape::Triangle: return {5.f, 5.f};
    case Shape::Ell: return {5.f, 5.f};
  }
  return {4.f, 4.f};
}

constexpr float kEllThickness = 2.0f;

// Point-in-shape test in object-local coordinates (u from center x, v above
// base). Collisions use bounding boxes; this is rasterization only.
bool shape_contains(Shape s, float w, float h, float u, float v) {
  if (v < 0.f || v > h || u < -0.5f * w || u > 0.5f * w) return false;
  switch (s) {
    case Shape::Square:
    case Shape::Rectangle:
      return true;
    case Shape::Triangle:
      return std::abs(u) <= 0.5f * w * (1.f - v / h);
    case Shape::Ell:
      return (u <= -0.5f * w + kEllThickness) || (v <= kEllThickness);
  }
  return false;
}

float clampf(float v, float lo, float hi) { return std::min(hi, std::max(lo, v)); }

float footprint_overlap(const ObjectState& a, const ObjectState& b) {
  return std::min(a.right(), b.right()) - std::max(a.left(), b.left());
}

bool z_ranges_touch(const ObjectState& a, const ObjectState& b) {
  return std::min(a.top(), b.top()) - std::max(a.z, b.z) > 0.01f;
}

ObjectState* find_mut(SceneState& s, int id) {
  for (auto& o : s.objects)
    if (o.id == id) return &o;
  return nullptr;
}

// Objects resting on `id`, directly or through a stack.
void collect_riders(const SceneState& s, int id, std::vector<int>& out) {
  for (const auto& o : s.objects) {
    if (o.resting_on == id) {
      out.push_back(o.id);
      collect_riders(s, o.id, out);
    }
  }
}

// Lets `o` fall straight down to the best support (footprint overlap at least
// kSupportMinOverlap, top no higher than the current base + 0.25, highest top
// wins, ties to the lower id). An object overlapping by less than the support
// threshold does not stop the fall; `o` slides off its edge instead — or, when
// a wall leaves no room on that side, slides further onto it until it
// qualifies as a support.
void drop_object(SceneState& s, ObjectState& o) {
  for (int guard = 0; guard < 8; ++guard) {
    int best = kFloor;
    float best_top = 0.f;
    for (const auto& c : s.objects) {
      if (c.id == o.id || c.resting_on == kHeld) continue;
      if (footprint_overlap(o, c) < kSupportMinOverlap) continue;
      const float t = c.top();
      if (t <= o.z + 0.25f && t > best_top) {
        best_top = t;
        best = c.id;
      }
    }
    const ObjectState* blocker = nullptr;
    for (const auto& c : s.objects) {
      if (c.id == o.id || c.resting_on == kHeld || c.id == best) continue;
      if (footprint_overlap(o, c) <= 0.01f) continue;
      if (c.top() <= best_top + 1e-3f || c.z >= o.top() - 1e-3f) continue;  // not in the path
      if (blocker == nullptr || c.top() > blocker->top()) blocker = &c;
    }
    if (blocker == nullptr) {
      o.resting_on = best;
      o.z = best_top;
      return;
    }
    const float off_near = blocker->left() - 0.5f * o.width - 0.01f;
    const float off_far = blocker->right() + 0.5f * o.width + 0.01f;
    auto in_bounds = [&](float x) {
      return x - 0.5f * o.width >= 0.f && x + 0.5f * o.width <= kWorldW;
    };
    const float nx = o.x <= blocker->x ? off_near : off_far;
    if (in_bounds(nx)) {
      o.x = nx;
    } else if (blocker->top() <= o.z + 0.25f) {
      // A wall leaves no room to slide off; slide further onto the blocker
      // until it qualifies as a support.
      const float need = kSupportMinOverlap + 0.01f;
      o.x = o.x <= blocker->x ? blocker->left() + need - 0.5f * o.width
                              : blocker->right() - need + 0.5f * o.width;
    } else {
      // Cornered against a wall by something too tall to rest on: tip over to
      // its other side (sum of widths keeps one side always in bounds).
      o.x = o.x <= blocker->x ? off_far : off_near;
    }
  }
}

// Re-resolves support for every non-held object whose support became invalid
// (moved away, picked up, or gone). Falls are instantaneous.
void settle(SceneState& s) {
  const int n = static_cast<int>(s.objects.size());
  for (int pass = 0; pass < 2 * n + 2; ++pass) {
    bool changed = false;
    // Low objects settle first so stacks collapse bottom-up.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (s.objects[a].z != s.objects[b].z) return s.objects[a].z < s.objects[b].z;
      return s.objects[a].id < s.objects[b].id;
    });
    for (int idx : order) {
      ObjectState& o = s.objects[idx];
      if (o.resting_on == kHeld) continue;
      bool valid = false;
      if (o.resting_on == kFloor) {
        valid = o.z == 0.f;
      } else {
        const ObjectState* sup = s.find(o.resting_on);
        valid = sup != nullptr && sup->resting_on != kHeld &&
                footprint_overlap(o, *sup) >= kSupportMinOverlap &&
                std::abs(o.z - sup->top()) <= 0.3f;
      }
      if (valid) continue;
      const float oz = o.z, ox = o.x;
      const int on = o.resting_on;
      drop_object(s, o);
      if (o.z != oz || o.x != ox || o.resting_on != on) changed = true;
    }
    if (!changed) break;
  }
}

// Sweeps object `seed_id` (with its riders) horizontally by `want`, pushing
// whatever it contacts. Contacted objects accrete into the moving unit, so
// chains push chains; a wall stops the whole unit. Returns the travel
// achieved.
float sweep_x(SceneState& s, int seed_id, float want) {
  if (want == 0.f) return 0.f;
  const float dir = want > 0.f ? 1.f : -1.f;
  float remaining = std::abs(want);
  float traveled = 0.f;
  std::vector<int> unit{seed_id};
  collect_riders(s, seed_id, unit);
  auto in_unit = [&](int id) { return std::find(unit.begin(), unit.end(), id) != unit.end(); };

  for (int guard = 0; guard < 16 && remaining > 1e-6f; ++guard) {
    float room = remaining;
    for (int mid : unit) {
      const ObjectState& m = *s.find(mid);
      room = std::min(room, dir > 0.f ? kWorldW - m.right() : m.left());
    }
    room = std::max(0.f, room);

    float gap_min = room + 1.f;
    int hit = kNone;
    for (int mid : unit) {
      const ObjectState& m = *s.find(mid);
      for (const auto& c : s.objects) {
        if (in_unit(c.id) || c.resting_on == kHeld) continue;
        if (!z_ranges_touch(m, c)) continue;
        const float gap = dir > 0.f ? c.left() - m.right() : m.left() - c.right();
        if (gap < -0.01f) continue;
        if (gap < gap_min) {
          gap_min = gap;
          hit = c.id;
        }
      }
    }

    const float move = std::min({remaining, room, std::max(0.f, gap_min)});
    for (int mid : unit) find_mut(s, mid)->x += dir * move;
    traveled += move;
    remaining -= move;
    if (remaining <= 1e-6f) break;
    if (hit != kNone && gap_min <= room) {
      std::vector<int> add{hit};
      collect_riders(s, hit, add);
      for (int id : add)
        if (!in_unit(id)) unit.push_back(id);
    } else {
      break;  // wall-limited
    }
  }
  return dir * traveled;
}

// First object matching a color selector, by id.
const ObjectState* first_match(const SceneState& s, Color c, int exclude = kNone) {
  for (const auto& o : s.objects)
    if (o.color == c && o.id != exclude) return &o;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Rendering

Eigen::Vector3f background_pixel(const SceneConfig& cfg, float phase, float x, float z) {
  if (cfg.textured_background()) {
    // Diagonal stripes; both tones stay far from every palette color.
    const float s = x * 0.35f + z * 0.20f + phase;
    const float frac = s - std::floor(s);
    return frac < 0.5f ? Eigen::Vector3f(0.13f, 0.16f, 0.20f)
                       : Eigen::Vector3f(0.22f, 0.25f, 0.30f);
  }
  return {0.f, 0.f, 0.f};
}

struct RenderBuffers {
  Image image;
  Eigen::ArrayXXi owner;
};

RenderBuffers render_camera(const SceneState& s, int camera) {
  const int n = s.config.image_size;
  const float px = kWorldW / static_cast<float>(n);
  RenderBuffers out;
  out.image = Image(n, n);
  out.owner = Eigen::ArrayXXi::Constant(n, n, kOwnerBackground);
  const bool mirrored = (camera % 2) == 1;

  const GripperState& g = s.gripper;
  const float half_gap = 0.75f + 2.25f * g.aperture;
  const float finger_w = 0.75f;

  for (int r = 0; r < n; ++r) {
    const float z = kWorldH - (r + 0.5f) * px;
    for (int c = 0; c < n; ++c) {
      float x = (c + 0.5f) * px;
      if (mirrored) x = kWorldW - x;
      Eigen::Vector3f col = background_pixel(s.config, s.bg_phase, x, z);
      int owner = kOwnerBackground;
      if (z < kFloorHeight) col = kFloorColor;
      for (const auto& o : s.objects) {
        if (shape_contains(o.shape, o.width, o.height, x - o.x, z - o.z)) {
          col = color_rgb(o.color);
          owner = o.id;
        }
      }
      // Gripper drawn last: palm bar plus two fingers.
      const bool palm =
          std::abs(x - g.x) <= half_gap + finger_w && z >= g.z + 0.5f && z <= g.z + 1.5f;
      const bool finger =
          std::abs(std::abs(x - g.x) - (half_gap + 0.5f * finger_w)) <= 0.5f * finger_w &&
          z >= g.z - 2.5f && z <= g.z + 0.5f;
      if (palm || finger) {
        col = kGripperColor;
        owner = kOwnerGripper;
      }
      out.image.set_pixel(r, c, col);
      out.owner(r, c) = owner;
    }
  }
  return out;
}

Eigen::Vector4f proprio_of(const SceneState& s) {
  const GripperState& g = s.gripper;
  return {g.x / (0.5f * kWorldW) - 1.f, g.z / (0.5f * kWorldH) - 1.f, g.aperture,
          g.held == kNone ? 0.f : 1.f};
}

// ---------------------------------------------------------------------------
// Reward shaping: potential-based, so neither hovering near the target nor
// grasp/drop cycling accumulates return; only task progress pays.

float potential(const SceneState& s, const TaskSpec& task) {
  if (task.is_program()) return 0.f;
  const ObjectState* target = first_match(s, task.selectors[0]);
  if (target == nullptr) return 0.f;
  if (target->resting_on == kHeld) {
    // Base 0.85 puts the grasp jump at +0.3 above the best not-held
    // potential (0.55: at the grasp point with the gripper fully closed).
    float phi = 0.85f + std::min(target->z, kLiftThreshold) / kLiftThreshold;
    if (task.kind == TaskSpec::Kind::Stack) {
      const ObjectState* bottom = first_match(s, task.selectors[1], target->id);
      if (bottom != nullptr && std::abs(target->x - bottom->x) <= 1.5f &&
          target->z >= bottom->top() - 0.5f) {
        phi += 0.3f;
      }
    }
    return phi;
  }
  const Eigen::Vector2f gp = grasp_point(*target);
  const float d = std::hypot(s.gripper.x - gp.x(), s.gripper.z - gp.y());
  // Within twice the grasp tolerance, closing the gripper pays as well, so
  // approach -> close -> grasp -> raise is an increasing staircase instead of
  // a plateau followed by a cliff the policy has to find by chance. The
  // approach slope (0.4 over the diagonal) has to stand out against the
  // return variance of lucky grasps, or steering never gets off the ground.
  const float close_gate = std::max(0.f, 1.f - d / (2.f * kGraspTolerance));
  return 0.4f * (1.f - d / kDiag) + 0.15f * close_gate * (1.f - s.gripper.aperture);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::ThreeObjects: return "three_objects";
    case Variant::OneCube: return "one_cube";
    case Variant::FourCubes: return "four_cubes";
    case Variant::Recolor: return "recolor";
    case Variant::BackgroundTextured: return "background_textured";
    case Variant::MultiShape: return "multi_shape";
  }
  return "?";
}

std::optional<Variant> variant_from_name(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(Variant::MultiShape); ++i) {
    const Variant v = static_cast<Variant>(i);
    if (s == variant_name(v)) return v;
  }
  return std::nullopt;
}

std::string_view shape_name(Shape s) {
  switch (s) {
    case Shape::Square: return "square";
    case Shape::Rectangle: return "rectangle";
    case Shape::Triangle: return "triangle";
    case Shape::Ell: return "ell";
  }
  return "?";
}

std::optional<Shape> shape_from_name(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(Shape::Ell); ++i) {
    const Shape v = static_cast<Shape>(i);
    if (s == shape_name(v)) return v;
  }
  return std::nullopt;
}

Eigen::Vector2f grasp_offset(Shape shape, float width, float height) {
  switch (shape) {
    case Shape::Square:
    case Shape::Rectangle:
    case Shape::Triangle:
      return {0.f, height};
    case Shape::Ell:
      return {-0.5f * width + kEllThickness + 0.5f, kEllThickness};
  }
  return {0.f, height};
}

std::string SceneConfig::serialize() const {
  std::ostringstream os;
  os << "variant=" << variant_name(variant) << "\n";
  os << "image_size=" << image_size << "\n";
  os << "cameras=" << cameras << "\n";
  os << "pixel_noise=" << (pixel_noise ? 1 : 0) << "\n";
  os << "noise_sigma=" << noise_sigma << "\n";
  os << "shape_pool=";
  bool first_color = true;
  for (const auto& [color, shapes] : shape_pool) {
    if (!first_color) os << ",";
    first_color = false;
    os << color_name(color) << ":";
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (i) os << "|";
      os << shape_name(shapes[i]);
    }
  }
  os << "\n";
  return os.str();
}

SceneConfig SceneConfig::deserialize(const std::string& text) {
  SceneConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("bad scene config line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "variant") {
      const auto v = variant_from_name(val);
      if (!v) throw Error("unknown variant: " + val);
      cfg.variant = *v;
    } else if (key == "image_size") {
      cfg.image_size = std::stoi(val);
    } else if (key == "cameras") {
      cfg.cameras = std::stoi(val);
    } else if (key == "pixel_noise") {
      cfg.pixel_noise = val == "1";
    } else if (key == "noise_sigma") {
      cfg.noise_sigma = std::stof(val);
    } else if (key == "shape_pool") {
      cfg.shape_pool.clear();
      std::istringstream entries(val);
      std::string entry;
      while (std::getline(entries, entry, ',')) {
        if (entry.empty()) continue;
        const auto colon = entry.find(':');
        if (colon == std::string::npos) throw Error("bad shape_pool entry: " + entry);
        const auto col = color_from_name(entry.substr(0, colon));
        if (!col) throw Error("unknown color in shape_pool: " + entry);
        std::vector<Shape> shapes;
        std::istringstream names(entry.substr(colon + 1));
        std::string sname;
        while (std::getline(names, sname, '|')) {
          const auto sh = shape_from_name(sname);
          if (!sh) throw Error("unknown shape in shape_pool: " + sname);
          shapes.push_back(*sh);
        }
        cfg.shape_pool[*col] = std::move(shapes);
      }
    } else {
      throw Error("unknown scene config key: " + key);
    }
  }
  return cfg;
}

SceneConfig make_variant(SceneConfig base, Variant variant) {
  base.variant = variant;
  if (variant == Variant::MultiShape && base.shape_pool.empty()) {
    base.shape_pool[Color::Red] = {Shape::Square, Shape::Rectangle};
    base.shape_pool[Color::Green] = {Shape::Triangle, Shape::Ell};
    base.shape_pool[Color::Blue] = {Shape::Rectangle, Shape::Triangle};
    base.shape_pool[Color::Yellow] = {Shape::Square, Shape::Ell};
    base.shape_pool[Color::Magenta] = {Shape::Triangle, Shape::Square};
    base.shape_pool[Color::Cyan] = {Shape::Ell, Shape::Rectangle};
  }
  if (variant != Variant::MultiShape) base.shape_pool.clear();
  return base;
}

std::pair<SceneState, Observation> reset(const SceneConfig& config, const TaskSpec& task,
                                         std::uint64_t seed) {
  // A stage with a repeated selector can never be disambiguated over the
  // channel (both argument masks would be identical); scenes also assign one
  // object per required color, so reject it up front.
  auto check_stage = [](const std::vector<Color>& sel) {
    for (std::size_t i = 0; i < sel.size(); ++i)
      for (std::size_t j = i + 1; j < sel.size(); ++j)
        if (sel[i] == sel[j])
          throw UnsatisfiableTask("selector '" + std::string(color_name(sel[i])) +
                                  "' repeated within one task");
  };
  if (task.is_program()) {
    for (const auto& st : task.stages) check_stage(st.selectors);
  } else {
    check_stage(task.selectors);
  }

  std::vector<Color> required;
  for (Color c : task.all_selectors()) {
    if (std::find(required.begin(), required.end(), c) == required.end()) required.push_back(c);
  }
  const int count = config.object_count();
  if (static_cast<int>(required.size()) > count) {
    throw UnsatisfiableTask("task needs " + std::to_string(required.size()) +
                            " colors but scene has " + std::to_string(count) + " objects");
  }

  SceneState s;
  s.config = config;
  Rng rng(seed);

  std::vector<Color> colors = required;
  if (config.variant == Variant::Recolor) {
    // Distractors from the extended palette, targets untouched.
    std::vector<Color> pool = {Color::Yellow, Color::Magenta, Color::Cyan};
    for (Color c : required) pool.erase(std::remove(pool.begin(), pool.end(), c), pool.end());
    while (static_cast<int>(colors.size()) < count) {
      if (pool.empty()) throw UnsatisfiableTask("recolor distractor palette exhausted");
      const int k = rng.uniform_int(static_cast<int>(pool.size()));
      colors.push_back(pool[k]);
      pool.erase(pool.begin() + k);
    }
  } else if (config.variant == Variant::FourCubes) {
    // Extra cubes drawn from the full palette; duplicates allowed, so a
    // selector may match several objects here.
    while (static_cast<int>(colors.size()) < count) {
      colors.push_back(static_cast<Color>(rng.uniform_int(kPaletteSize)));
    }
  } else {
    for (int i = 0; i < kPaletteSize && static_cast<int>(colors.size()) < count; ++i) {
      const Color c = static_cast<Color>(i);
      if (std::find(colors.begin(), colors.end(), c) == colors.end()) colors.push_back(c);
    }
  }

  for (int i = 0; i < count; ++i) {
    ObjectState o;
    o.id = i;
    o.color = colors[i];
    o.shape = Shape::Square;
    const auto pool_it = config.shape_pool.find(o.color);
    if (pool_it != config.shape_pool.end() && !pool_it->second.empty()) {
      o.shape = pool_it->second[rng.uniform_int(static_cast<int>(pool_it->second.size()))];
    }
    const ShapeDims d = shape_dims(o.shape);
    o.width = d.w;
    o.height = d.h;
    o.z = 0.f;
    o.resting_on = kFloor;
    s.objects.push_back(o);
  }

  // Non-overlapping floor placement; falls back to even spacing if rejection
  // sampling runs dry (only plausible with four wide objects).
  bool placed = false;
  for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
    placed = true;
    for (auto& o : s.objects) {
      bool ok = false;
      for (int t = 0; t < 100 && !ok; ++t) {
        o.x = static_cast<float>(rng.uniform(kPlacementMargin + 0.5f * o.width,
                                             kWorldW - kPlacementMargin - 0.5f * o.width));
        ok = true;
        for (const auto& other : s.objects) {
          if (other.id >= o.id) break;
          if (std::abs(o.x - other.x) < 0.5f * (o.width + other.width) + kPlacementGap) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) {
        placed = false;
        break;
      }
    }
  }
  if (!placed) {
    float cursor = kPlacementMargin;
    for (auto& o : s.objects) {
      o.x = cursor + 0.5f * o.width;
      cursor += o.width + kPlacementGap;
    }
  }

  s.gripper = GripperState{kHomeX, kHomeZ, 1.f, kNone};
  s.step = 0;
  s.success_latched = false;
  s.bg_phase = config.textured_background() ? static_cast<float>(rng.uniform(0.0, 1.0)) : 0.f;
  s.noise_salt = rng.bits();

  Observation obs = render(s);
  return {std::move(s), std::move(obs)};
}

bool success(const SceneState& state, const TaskSpec& task) {
  if (task.is_program()) throw Error("success() judges lift/stack tasks only");
  if (task.kind == TaskSpec::Kind::Lift) {
    for (const auto& o : state.objects) {
      if (o.color == task.selectors[0] && o.resting_on == kHeld && o.z >= kLiftThreshold)
        return true;
    }
    return false;
  }
  // Stack: a released top-matching object resting on a bottom-matching one.
  if (state.gripper.held != kNone) return false;
  for (const auto& top : state.objects) {
    if (top.color != task.selectors[0]) continue;
    if (top.resting_on < 0) continue;
    const ObjectState* bottom = state.find(top.resting_on);
    if (bottom != nullptr && bottom->color == task.selectors[1]) return true;
  }
  return false;
}

StepResult step(const SceneState& state, const Action& action, const TaskSpec& task) {
  SceneState s = state;
  const float phi_before = potential(state, task);

  auto comp = [](float v) { return std::isfinite(v) ? clampf(v, -1.f, 1.f) : 0.f; };
  const float dx = comp(action.dx());
  const float dz = comp(action.dz());
  const float grip = comp(action.grip());

  GripperState& g = s.gripper;
  ObjectState* held = g.held == kNone ? nullptr : find_mut(s, g.held);
  const Eigen::Vector2f off = held == nullptr
                                  ? Eigen::Vector2f::Zero()
                                  : grasp_offset(held->shape, held->width, held->height);

  // --- horizontal move; a held object pushes whatever it sweeps into.
  const float gx_try = clampf(g.x + dx * kGripSpeed, kGripperXMin, kGripperXMax);
  if (held == nullptr) {
    g.x = gx_try;  // an empty gripper never collides
  } else {
    sweep_x(s, held->id, gx_try - g.x);
    g.x = held->x + off.x();
    settle(s);
    held = find_mut(s, g.held);
  }

  // --- vertical move; solid contact clamps a held object at surfaces.
  float gz_new = clampf(g.z + dz * kGripSpeed, kGripperZMin, kGripperZMax);
  if (held != nullptr) {
    float base_new = gz_new - off.y();
    if (base_new < held->z) {
      float stop = 0.f;  // floor
      for (const auto& other : s.objects) {
        if (other.id == held->id) continue;
        if (footprint_overlap(*held, other) <= 0.01f) continue;
        if (other.top() <= held->z + 1e-4f) stop = std::max(stop, other.top());
      }
      base_new = std::max(base_new, std::min(stop, held->z));
    } else if (base_new > held->z) {
      float ceil_z = kWorldH;
      for (const auto& other : s.objects) {
        if (other.id == held->id) continue;
        if (footprint_overlap(*held, other) <= 0.01f) continue;
        if (other.z >= held->top() - 1e-4f) ceil_z = std::min(ceil_z, other.z);
      }
      base_new = std::min(base_new, ceil_z - held->height);
    }
    base_new = std::max(base_new, 0.f);
    held->z = base_new;
    gz_new = base_new + off.y();
  }
  g.z = gz_new;

  // --- aperture, then release / grasp
  g.aperture = clampf(g.aperture + grip * kApertureRate, 0.f, 1.f);

  if (held != nullptr && g.aperture >= 0.5f) {
    ObjectState& o = *held;
    o.resting_on = kFloor;  // provisional; the drop resolves the true support
    g.held = kNone;
    held = nullptr;
    drop_object(s, o);
    settle(s);
  } else if (held == nullptr && grip < -0.1f && g.aperture < 0.5f) {
    // Snap grasp: the gripper wraps the nearest grasp point within tolerance.
    // The object does not move, so no overlap can appear.
    int best = kNone;
    float best_d = kGraspTolerance;
    for (const auto& o : s.objects) {
      const Eigen::Vector2f gp = grasp_point(o);
      const float d = std::hypot(g.x - gp.x(), g.z - gp.y());
      if (d <= best_d) {
        best_d = d;
        best = o.id;
      }
    }
    if (best != kNone) {
      ObjectState& o = *find_mut(s, best);
      const Eigen::Vector2f goff = grasp_offset(o.shape, o.width, o.height);
      g.x = clampf(o.x + goff.x(), kGripperXMin, kGripperXMax);
      g.z = clampf(o.z + goff.y(), kGripperZMin, kGripperZMax);
      o.resting_on = kHeld;
      g.held = best;
      settle(s);  // anything stacked on the grasped object falls
    }
  }

  s.step += 1;

  StepResult out;
  const bool was_latched = s.success_latched;
  bool succ_now = false;
  if (!task.is_program()) succ_now = success(s, task);
  s.success_latched = was_latched || succ_now;

  // Potential difference, a small living cost (so finishing early beats
  // loitering), and a terminal bonus on first success.
  float reward = potential(s, task) - phi_before - kLivingCost;
  if (!was_latched && succ_now) {
    reward += task.kind == TaskSpec::Kind::Stack ? 2.0f : 1.0f;
  }

  out.done = s.success_latched || s.step >= kEpisodeLimit;
  out.reward = reward;
  out.obs = render(s);
  out.state = std::move(s);
  return out;
}

Action scripted_expert(const SceneState& state, const TaskSpec& task) {
  if (task.is_program()) throw Error("scripted_expert drives lift/stack tasks only");
  const ObjectState* target = first_match(state, task.selectors[0]);
  if (target == nullptr)
    throw NoTarget("no object matches selector '" +
                   std::string(color_name(task.selectors[0])) + "'");
  const GripperState& g = state.gripper;
  auto toward = [](float err) { return clampf(err / kGripSpeed, -1.f, 1.f); };

  // Done and empty-handed: retreat upward instead of re-grasping, so running
  // past the success step (program stages run out their full budget) does not
  // undo the completed task.
  if (g.held == kNone && success(state, task)) return {0.f, 1.f, 1.f};

  if (target->resting_on != kHeld) {
    if (g.held != kNone) return {0.f, 0.f, 1.f};  // holding the wrong object: let go
    const Eigen::Vector2f gp = grasp_point(*target);
    const float ex = gp.x() - g.x;
    const float ez = gp.y() - g.z;
    if (std::hypot(ex, ez) > 1.0f) {
      return {toward(ex), toward(ez), g.aperture < 0.9f ? 1.f : 0.f};
    }
    return {toward(ex), toward(ez), -1.f};
  }

  if (task.kind == TaskSpec::Kind::Lift) return {0.f, 1.f, -1.f};

  // Stack: rise clear of every other object, traverse, lower onto the bottom,
  // open.
  const ObjectState* bottom = first_match(state, task.selectors[1], target->id);
  if (bottom == nullptr)
    throw NoTarget("no object matches selector '" +
                   std::string(color_name(task.selectors[1])) + "'");
  float max_other_top = 0.f;
  for (const auto& o : state.objects) {
    if (o.id != target->id) max_other_top = std::max(max_other_top, o.top());
  }
  const Eigen::Vector2f off = grasp_offset(target->shape, target->width, target->height);
  const float gx_place = bottom->x + off.x();
  if (std::abs(g.x - gx_place) > 0.5f) {
    if (target->z < max_other_top + 0.75f) return {0.f, 1.f, -1.f};
    return {toward(gx_place - g.x), 0.f, -1.f};
  }
  if (target->z > bottom->top() + 0.3f) {
    return {toward(gx_place - g.x), toward(bottom->top() + 0.2f - target->z), -1.f};
  }
  return {0.f, 0.f, 1.f};
}

Observation render(const SceneState& state) {
  Observation obs = render_clean(state);
  if (!state.config.pixel_noise) return obs;
  for (std::size_t cam = 0; cam < obs.cameras.size(); ++cam) {
    Rng noise(state.noise_salt ^
              splitmix64(static_cast<std::uint64_t>(state.step) * 64 + cam));
    const float sigma = state.config.noise_sigma;
    for (auto& plane : obs.cameras[cam].rgb) {
      for (Eigen::Index i = 0; i < plane.size(); ++i) {
        plane.data()[i] =
            clampf(plane.data()[i] + static_cast<float>(noise.uniform(-sigma, sigma)), 0.f, 1.f);
      }
    }
  }
  return obs;
}

Observation render_clean(const SceneState& state) {
  Observation obs;
  obs.cameras.reserve(state.config.cameras);
  for (int cam = 0; cam < state.config.cameras; ++cam) {
    obs.cameras.push_back(render_camera(state, cam).image);
  }
  obs.proprio = proprio_of(state);
  return obs;
}

Plane oracle_mask(const SceneState& state, int object_id, int camera) {
  if (state.find(object_id) == nullptr)
    throw UnknownObject("no object with id " + std::to_string(object_id));
  if (camera < 0 || camera >= state.config.cameras) throw Error("camera index out of range");
  const RenderBuffers rb = render_camera(state, camera);
  return (rb.owner == object_id).cast<float>();
}

SceneState recolor_objects(SceneState state, const std::map<Color, Color>& mapping) {
  for (auto& o : state.objects) {
    const auto it = mapping.find(o.color);
    if (it != mapping.end()) o.color = it->second;
  }
  return state;
}

std::string serialize_state(const SceneState& state) {
  std::ostringstream os;
  auto fbits = [&os](float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, sizeof(u));
    os << u << " ";
  };
  os << state.config.serialize();
  os << "objects " << state.objects.size() << "\n";
  for (const auto& o : state.objects) {
    os << o.id << " " << static_cast<int>(o.color) << " " << static_cast<int>(o.shape) << " "
       << o.resting_on << " ";
    fbits(o.x);
    fbits(o.z);
    fbits(o.width);
    fbits(o.height);
    os << "\n";
  }
  os << "gripper ";
  fbits(state.gripper.x);
  fbits(state.gripper.z);
  fbits(state.gripper.aperture);
  os << state.gripper.held << "\n";
  os << "step " << state.step << " latched " << (state.success_latched ? 1 : 0) << " salt "
     << state.noise_salt << " phase ";
  fbits(state.bg_phase);
  os << "\n";
  return os.str();
}

}  // namespace debench::sim2d

#ifndef DEBENCH_CODEC_HPP_
#define DEBENCH_CODEC_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "debench/common.hpp"
#include "debench/image.hpp"
#include "debench/sim2d.hpp"
#include "debench/task.hpp"

namespace debench::codec {

// The channel between dispatcher and executor carries only filtered planes
// and proprioception — never raw pixels. Everything color-specific dies here.

constexpr float kMaskTolerance = 0.05f;
constexpr int kPointerBlob = 5;  // blob side length, clipped at image borders

struct ChannelConfig {
  enum class ArgPlanes { Mask, Pointer };
  ArgPlanes arg_planes = ArgPlanes::Mask;
  bool edge = true;

  // "mask_edge" | "pointer_edge" | "mask_only" | "pointer_only"
  std::string name() const;
  static std::optional<ChannelConfig> from_name(std::string_view s);

  // Planes per camera for a task of the given arity.
  int plane_count(int arity) const { return arity + (edge ? 1 : 0); }

  bool operator==(const ChannelConfig& o) const {
    return arg_planes == o.arg_planes && edge == o.edge;
  }
};

// What one executor invocation sees.
struct Message {
  std::string executor_id;
  std::vector<std::vector<Plane>> planes;  // [camera][slot]: args in selector order, then edge
  Eigen::Vector4f proprio = Eigen::Vector4f::Zero();
};

// 1 where the pixel is within `tol` of the palette color under the
// max-channel (Chebyshev) distance.
Plane mask_filter(const Image& image, Color color, float tol = kMaskTolerance);

// Integer-rounded mean (row, col) of the mask's 1-pixels; empty mask has none.
std::optional<std::pair<int, int>> centroid(const Plane& mask);

// 5x5 blob of ones centered on the mask centroid, clipped at the borders;
// all-zero for an empty mask.
Plane pointer_filter(const Plane& mask);

// Gradient magnitude of the equal-weight luminance under a 3x3 Prewitt pair
// with edge-replicate padding, scaled by 1/3 and capped at 1.
Plane edge_filter(const Image& image);

// Builds the channel message for a lift/stack task from an observation.
// Selectors that match nothing still emit their (all-zero) plane.
Message assemble_message(const TaskSpec& task, const sim2d::Observation& obs,
                         const ChannelConfig& config);

bool messages_equal(const Message& a, const Message& b);

}  // namespace debench::codec

#endif  // DEBENCH_CODEC_HPP_

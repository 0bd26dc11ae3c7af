#include "debench/codec.hpp"

#include <algorithm>
#include <cmath>

namespace debench::codec {

std::string ChannelConfig::name() const {
  const bool mask = arg_planes == ArgPlanes::Mask;
  if (edge) return mask ? "mask_edge" : "pointer_edge";
  return mask ? "mask_only" : "pointer_only";
}

std::optional<ChannelConfig> ChannelConfig::from_name(std::string_view s) {
  ChannelConfig c;
  if (s == "mask_edge") {
    c.arg_planes = ArgPlanes::Mask;
    c.edge = true;
  } else if (s == "pointer_edge") {
    c.arg_planes = ArgPlanes::Pointer;
    c.edge = true;
  } else if (s == "mask_only") {
    c.arg_planes = ArgPlanes::Mask;
    c.edge = false;
  } else if (s == "pointer_only") {
    c.arg_planes = ArgPlanes::Pointer;
    c.edge = false;
  } else {
    return std::nullopt;
  }
  return c;
}

Plane mask_filter(const Image& image, Color color, float tol) {
  const Eigen::Vector3f c = color_rgb(color);
  const Plane dist = (image.rgb[0] - c[0])
                         .abs()
                         .max((image.rgb[1] - c[1]).abs())
                         .max((image.rgb[2] - c[2]).abs());
  return (dist <= tol).cast<float>();
}

std::optional<std::pair<int, int>> centroid(const Plane& mask) {
  double sr = 0.0, sc = 0.0;
  long n = 0;
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      if (mask(r, c) == 1.f) {
        sr += static_cast<double>(r);
        sc += static_cast<double>(c);
        ++n;
      }
  if (n == 0) return std::nullopt;
  return std::make_pair(static_cast<int>(std::llround(sr / n)),
                        static_cast<int>(std::llround(sc / n)));
}

Plane pointer_filter(const Plane& mask) {
  Plane out = Plane::Zero(mask.rows(), mask.cols());
  const auto c = centroid(mask);
  if (!c) return out;
  const int half = kPointerBlob / 2;
  const int r0 = std::max(0, c->first - half);
  const int r1 = std::min<int>(mask.rows() - 1, c->first + half);
  const int c0 = std::max(0, c->second - half);
  const int c1 = std::min<int>(mask.cols() - 1, c->second + half);
  out.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1).setConstant(1.f);
  return out;
}

Plane edge_filter(const Image& image) {
  const Plane lum = (image.rgb[0] + image.rgb[1] + image.rgb[2]) / 3.f;
  const int rows = static_cast<int>(lum.rows());
  const int cols = static_cast<int>(lum.cols());
  auto at = [&](int r, int c) {
    r = std::clamp(r, 0, rows - 1);
    c = std::clamp(c, 0, cols - 1);
    return lum(r, c);
  };
  Plane out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      float gx = 0.f, gy = 0.f;
      for (int k = -1; k <= 1; ++k) {
        gx += at(r + k, c + 1) - at(r + k, c - 1);
        gy += at(r + 1, c + k) - at(r - 1, c + k);
      }
      out(r, c) = std::min(1.f, std::sqrt(gx * gx + gy * gy) / 3.f);
    }
  }
  return out;
}

Message assemble_message(const TaskSpec& task, const sim2d::Observation& obs,
                         const ChannelConfig& config) {
  if (task.is_program())
    throw Error("assemble_message takes lift/stack tasks; expand programs first");
  Message msg;
  msg.executor_id = task.executor_id();
  msg.proprio = obs.proprio;
  msg.planes.reserve(obs.cameras.size());
  for (const Image& img : obs.cameras) {
    std::vector<Plane> slots;
    slots.reserve(config.plane_count(task.arity()));
    for (Color sel : task.selectors) {
      Plane m = mask_filter(img, sel);
      slots.push_back(config.arg_planes == ChannelConfig::ArgPlanes::Mask ? std::move(m)
                                                                          : pointer_filter(m));
    }
    if (config.edge) slots.push_back(edge_filter(img));
    msg.planes.push_back(std::move(slots));
  }
  return msg;
}

bool messages_equal(const Message& a, const Message& b) {
  if (a.executor_id != b.executor_id) return false;
  if (a.proprio != b.proprio) return false;
  if (a.planes.size() != b.planes.size()) return false;
  for (std::size_t cam = 0; cam < a.planes.size(); ++cam) {
    if (a.planes[cam].size() != b.planes[cam].size()) return false;
    for (std::size_t k = 0; k < a.planes[cam].size(); ++k)
      if (!bitwise_equal(a.planes[cam][k], b.planes[cam][k])) return false;
  }
  return true;
}

}  // namespace debench::codec

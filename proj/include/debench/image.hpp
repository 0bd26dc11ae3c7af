#ifndef DEBENCH_IMAGE_HPP_
#define DEBENCH_IMAGE_HPP_

#include <array>

#include <Eigen/Core>

namespace debench {

// Single-channel plane, indexed (row, col); row 0 is the top of the image.
using Plane = Eigen::ArrayXXf;

// RGB image as three planes, values in [0, 1].
struct Image {
  std::array<Plane, 3> rgb;

  Image() = default;
  Image(int rows, int cols) {
    for (auto& p : rgb) p = Plane::Zero(rows, cols);
  }

  int rows() const { return static_cast<int>(rgb[0].rows()); }
  int cols() const { return static_cast<int>(rgb[0].cols()); }

  void fill(const Eigen::Vector3f& c) {
    for (int k = 0; k < 3; ++k) rgb[k].setConstant(c[k]);
  }

  void set_pixel(int r, int c, const Eigen::Vector3f& v) {
    for (int k = 0; k < 3; ++k) rgb[k](r, c) = v[k];
  }

  Eigen::Vector3f pixel(int r, int c) const {
    return {rgb[0](r, c), rgb[1](r, c), rgb[2](r, c)};
  }

  bool same_size(const Image& o) const { return rows() == o.rows() && cols() == o.cols(); }
};

inline bool bitwise_equal(const Plane& a, const Plane& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a == b).all();
}

inline bool bitwise_equal(const Image& a, const Image& b) {
  return bitwise_equal(a.rgb[0], b.rgb[0]) && bitwise_equal(a.rgb[1], b.rgb[1]) &&
         bitwise_equal(a.rgb[2], b.rgb[2]);
}

}  // namespace debench

#endif  // DEBENCH_IMAGE_HPP_

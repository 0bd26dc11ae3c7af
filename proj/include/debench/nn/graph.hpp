#ifndef DEBENCH_NN_GRAPH_HPP_
#define DEBENCH_NN_GRAPH_HPP_

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "debench/common.hpp"

namespace debench::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// Reverse-mode tape over dense matrices. Every op appends a node holding its
// value and a closure that scatters the node's cotangent into its inputs'
// gradient slots; backward() replays the closures in reverse order. The tape
// is templated on the scalar so tests can run the whole network in double
// against finite differences while production uses float.
template <typename S>
class Graph {
 public:
  int leaf(Mat<S> v) { return push(std::move(v)); }

  const Mat<S>& val(int id) const { return nodes_[id].value; }
  const Mat<S>& grad(int id) const { return nodes_[id].grad; }

  int add(int a, int b) {
    same_shape(a, b, "add");
    const int id = push(nodes_[a].value + nodes_[b].value);
    nodes_[id].back = [this, id, a, b] {
      nodes_[a].grad += nodes_[id].grad;
      nodes_[b].grad += nodes_[id].grad;
    };
    return id;
  }

  int sub(int a, int b) {
    same_shape(a, b, "sub");
    const int id = push(nodes_[a].value - nodes_[b].value);
    nodes_[id].back = [this, id, a, b] {
      nodes_[a].grad += nodes_[id].grad;
      nodes_[b].grad -= nodes_[id].grad;
    };
    return id;
  }

  int mul(int a, int b) {  // elementwise
    same_shape(a, b, "mul");
    const int id = push(nodes_[a].value.cwiseProduct(nodes_[b].value));
    nodes_[id].back = [this, id, a, b] {
      nodes_[a].grad += nodes_[id].grad.cwiseProduct(nodes_[b].value);
      nodes_[b].grad += nodes_[id].grad.cwiseProduct(nodes_[a].value);
    };
    return id;
  }

  int scale(int a, S k) {
    const int id = push(nodes_[a].value * k);
    nodes_[id].back = [this, id, a, k] { nodes_[a].grad += nodes_[id].grad * k; };
    return id;
  }

  int add_scalar(int a, S k) {
    const int id = push((nodes_[a].value.array() + k).matrix());
    nodes_[id].back = [this, id, a] { nodes_[a].grad += nodes_[id].grad; };
    return id;
  }

  int matmul(int a, int b) {
    if (nodes_[a].value.cols() != nodes_[b].value.rows())
      throw ShapeMismatch("matmul inner dimensions disagree");
    const int id = push(nodes_[a].value * nodes_[b].value);
    nodes_[id].back = [this, id, a, b] {
      nodes_[a].grad.noalias() += nodes_[id].grad * nodes_[b].value.transpose();
      nodes_[b].grad.noalias() += nodes_[a].value.transpose() * nodes_[id].grad;
    };
    return id;
  }

  // m + v broadcast across columns (v is a column vector).
  int add_colvec(int m, int v) {
    if (nodes_[m].value.rows() != nodes_[v].value.rows() || nodes_[v].value.cols() != 1)
      throw ShapeMismatch("add_colvec wants (R,C) and (R,1)");
    const int id = push(nodes_[m].value.colwise() + nodes_[v].value.col(0));
    nodes_[id].back = [this, id, m, v] {
      nodes_[m].grad += nodes_[id].grad;
      nodes_[v].grad.col(0) += nodes_[id].grad.rowwise().sum();
    };
    return id;
  }

  // m ∘ v broadcast across columns.
  int mul_colvec(int m, int v) {
    if (nodes_[m].value.rows() != nodes_[v].value.rows() || nodes_[v].value.cols() != 1)
      throw ShapeMismatch("mul_colvec wants (R,C) and (R,1)");
    const int id =
        push((nodes_[m].value.array().colwise() * nodes_[v].value.col(0).array()).matrix());
    nodes_[id].back = [this, id, m, v] {
      nodes_[m].grad +=
          (nodes_[id].grad.array().colwise() * nodes_[v].value.col(0).array()).matrix();
      nodes_[v].grad.col(0) +=
          nodes_[id].grad.cwiseProduct(nodes_[m].value).rowwise().sum();
    };
    return id;
  }

  int relu(int a) {
    const int id = push(nodes_[a].value.cwiseMax(S(0)));
    nodes_[id].back = [this, id, a] {
      nodes_[a].grad +=
          (nodes_[a].value.array() > S(0)).template cast<S>().matrix().cwiseProduct(
              nodes_[id].grad);
    };
    return id;
  }

  int tanh(int a) {
    const int id = push(nodes_[a].value.array().tanh().matrix());
    nodes_[id].back = [this, id, a] {
      nodes_[a].grad +=
          (S(1) - nodes_[id].value.array().square()).matrix().cwiseProduct(nodes_[id].grad);
    };
    return id;
  }

  int exp(int a) {
    const int id = push(nodes_[a].value.array().exp().matrix());
    nodes_[id].back = [this, id, a] {
      nodes_[a].grad += nodes_[id].value.cwiseProduct(nodes_[id].grad);
    };
    return id;
  }

  int log(int a) {
    const int id = push(nodes_[a].value.array().log().matrix());
    nodes_[id].back = [this, id, a] {
      nodes_[a].grad += nodes_[id].grad.cwiseQuotient(nodes_[a].value);
    };
    return id;
  }

  // Hard clamp; gradient passes only strictly inside the interval.
  int clamp(int a, S lo, S hi) {
    const int id = push(nodes_[a].value.cwiseMax(lo).cwiseMin(hi));
    nodes_[id].back = [this, id, a, lo, hi] {
      nodes_[a].grad += ((nodes_[a].value.array() > lo) && (nodes_[a].value.array() < hi))
                            .template cast<S>()
                            .matrix()
                            .cwiseProduct(nodes_[id].grad);
    };
    return id;
  }

  int sum(int a) {
    Mat<S> v(1, 1);
    v(0, 0) = nodes_[a].value.sum();
    const int id = push(std::move(v));
    nodes_[id].back = [this, id, a] {
      nodes_[a].grad.array() += nodes_[id].grad(0, 0);
    };
    return id;
  }

  int colwise_sum(int a) {
    const int id = push(nodes_[a].value.colwise().sum());
    nodes_[id].back = [this, id, a] {
      nodes_[a].grad.rowwise() += nodes_[id].grad.row(0);
    };
    return id;
  }

  int rowwise_mean(int a) {
    const int id = push(nodes_[a].value.rowwise().mean());
    nodes_[id].back = [this, id, a] {
      const S k = S(1) / static_cast<S>(nodes_[a].value.cols());
      const Eigen::Vector<S, Eigen::Dynamic> gk = nodes_[id].grad.col(0) * k;
      nodes_[a].grad.colwise() += gk;
    };
    return id;
  }

  // Column-major reshape (same element order, new dims).
  int reshape(int a, Eigen::Index r, Eigen::Index c) {
    if (nodes_[a].value.size() != r * c) throw ShapeMismatch("reshape element count");
    Mat<S> v = nodes_[a].value.reshaped(r, c);
    const int id = push(std::move(v));
    nodes_[id].back = [this, id, a] {
      nodes_[a].grad +=
          nodes_[id].grad.reshaped(nodes_[a].value.rows(), nodes_[a].value.cols());
    };
    return id;
  }

  int vcat(int a, int b) {
    if (nodes_[a].value.cols() != nodes_[b].value.cols())
      throw ShapeMismatch("vcat column counts disagree");
    const auto ra = nodes_[a].value.rows();
    const auto rb = nodes_[b].value.rows();
    Mat<S> v(ra + rb, nodes_[a].value.cols());
    v.topRows(ra) = nodes_[a].value;
    v.bottomRows(rb) = nodes_[b].value;
    const int id = push(std::move(v));
    nodes_[id].back = [this, id, a, b, ra, rb] {
      nodes_[a].grad += nodes_[id].grad.topRows(ra);
      nodes_[b].grad += nodes_[id].grad.bottomRows(rb);
    };
    return id;
  }

  int hcat(const std::vector<int>& ids) {
    if (ids.empty()) throw ShapeMismatch("hcat of nothing");
    const auto rows = nodes_[ids[0]].value.rows();
    Eigen::Index cols = 0;
    for (int i : ids) {
      if (nodes_[i].value.rows() != rows) throw ShapeMismatch("hcat row counts disagree");
      cols += nodes_[i].value.cols();
    }
    Mat<S> v(rows, cols);
    Eigen::Index at = 0;
    for (int i : ids) {
      v.middleCols(at, nodes_[i].value.cols()) = nodes_[i].value;
      at += nodes_[i].value.cols();
    }
    const int id = push(std::move(v));
    nodes_[id].back = [this, id, ids] {
      Eigen::Index at = 0;
      for (int i : ids) {
        nodes_[i].grad += nodes_[id].grad.middleCols(at, nodes_[i].value.cols());
        at += nodes_[i].value.cols();
      }
    };
    return id;
  }

  // Patch-matrix extraction for convolution: input (C, H*W) with pixel index
  // r*W + c, output (K*K*C, Ho*Wo) with row index (kr*K + kc)*C + ch, so a
  // weight matrix of shape (C_out, K*K*C) turns convolution into matmul.
  int im2col(int x, int H, int W, int K, int stride, int pad) {
    const Mat<S>& xv = nodes_[x].value;
    if (xv.cols() != static_cast<Eigen::Index>(H) * W)
      throw ShapeMismatch("im2col input is not H*W pixels");
    const int C = static_cast<int>(xv.rows());
    const int Ho = (H + 2 * pad - K) / stride + 1;
    const int Wo = (W + 2 * pad - K) / stride + 1;
    Mat<S> cols = Mat<S>::Zero(static_cast<Eigen::Index>(K) * K * C,
                               static_cast<Eigen::Index>(Ho) * Wo);
    for (int ro = 0; ro < Ho; ++ro) {
      for (int co = 0; co < Wo; ++co) {
        const int j = ro * Wo + co;
        for (int kr = 0; kr < K; ++kr) {
          const int r = ro * stride - pad + kr;
          if (r < 0 || r >= H) continue;
          for (int kc = 0; kc < K; ++kc) {
            const int c = co * stride - pad + kc;
            if (c < 0 || c >= W) continue;
            cols.col(j).segment((kr * K + kc) * C, C) = xv.col(r * W + c);
          }
        }
      }
    }
    const int id = push(std::move(cols));
    nodes_[id].back = [this, id, x, H, W, K, stride, pad, C, Ho, Wo] {
      for (int ro = 0; ro < Ho; ++ro) {
        for (int co = 0; co < Wo; ++co) {
          const int j = ro * Wo + co;
          for (int kr = 0; kr < K; ++kr) {
            const int r = ro * stride - pad + kr;
            if (r < 0 || r >= H) continue;
            for (int kc = 0; kc < K; ++kc) {
              const int c = co * stride - pad + kc;
              if (c < 0 || c >= W) continue;
              nodes_[x].grad.col(r * W + c) +=
                  nodes_[id].grad.col(j).segment((kr * K + kc) * C, C);
            }
          }
        }
      }
    };
    return id;
  }

  // Seeds the root (must be 1x1) with 1 and replays the tape backwards.
  void backward(int root) {
    if (nodes_[root].value.size() != 1)
      throw ShapeMismatch("backward root must be scalar");
    for (auto& n : nodes_) n.grad.setZero();
    nodes_[root].grad(0, 0) = S(1);
    for (int i = root; i >= 0; --i)
      if (nodes_[i].back) nodes_[i].back();
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    std::function<void()> back;
  };

  int push(Mat<S> v) {
    Node n;
    n.grad = Mat<S>::Zero(v.rows(), v.cols());
    n.value = std::move(v);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void same_shape(int a, int b, const char* what) const {
    if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
        nodes_[a].value.cols() != nodes_[b].value.cols())
      throw ShapeMismatch(std::string(what) + ": operand shapes disagree");
  }

  std::vector<Node> nodes_;
};

}  // namespace debench::nn

#endif  // DEBENCH_NN_GRAPH_HPP_

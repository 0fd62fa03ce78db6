#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kpset::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A named trainable tensor. `grad` accumulates across Graph::backward calls
/// until the owner clears it.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

using NodeId = std::int32_t;

/// Query row i may attend to key row j iff the segments agree (when given)
/// and, for causal masks, j <= i.
struct AttentionMask {
  std::vector<int> query_segment;
  std::vector<int> key_segment;
  bool causal = false;

  bool allows(Eigen::Index i, Eigen::Index j) const {
    if (!query_segment.empty() && query_segment[static_cast<std::size_t>(i)] !=
                                      key_segment[static_cast<std::size_t>(j)]) {
      return false;
    }
    return !causal || j <= i;
  }
};

/// One weighted negative log-likelihood term: -weight * log softmax(logits[row])[target].
struct NllTerm {
  Eigen::Index row;
  std::int32_t target;
  double weight;
};

/// Tape for reverse-mode differentiation over row-major matrices. Nodes are
/// appended in evaluation order; backward walks them in reverse. With
/// recording disabled the graph only evaluates values.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId constant(Matrix value);
  /// Leaf bound to `p`; gradients flow into p.grad on backward. Repeated calls
  /// with the same parameter return the same node.
  NodeId parameter(Parameter& p);
  /// Read-only leaf; never receives gradients.
  NodeId parameter(const Parameter& p);

  const Matrix& value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_; }

  NodeId matmul(NodeId a, NodeId b);
  /// x * weight + bias, bias broadcast over rows.
  NodeId linear(NodeId x, NodeId weight, NodeId bias);
  /// Elementwise sum; `b` may be a single row broadcast over a's rows.
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId relu(NodeId a);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId gather_rows(NodeId table, std::vector<Eigen::Index> rows);
  /// Vertical concatenation.
  NodeId concat_rows(std::span<const NodeId> parts);
  /// Multi-head scaled dot-product attention; q, k, v already projected.
  NodeId attention(NodeId q, NodeId k, NodeId v, int heads, const AttentionMask& mask);
  /// Scalar sum of weighted negative log-likelihood terms.
  NodeId nll(NodeId logits, std::vector<NllTerm> terms);

  /// Back-propagates from a 1x1 node, scaling its gradient by `seed`.
  void backward(NodeId root, double seed = 1.0);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Parameter* param = nullptr;
    bool needs_grad = false;
    std::function<void()> back;
  };

  NodeId push(Matrix value, bool needs_grad);
  Matrix& grad(NodeId id);
  bool needs(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

/// Row-wise softmax of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

}  // namespace kpset::ad

#include "kpset/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kpset::ad {

NodeId Graph::push(Matrix value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Matrix& Graph::grad(NodeId id) {
  Node& n = node(id);
  if (n.grad.size() == 0) {
    const Matrix& v = n.external ? *n.external : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

const Matrix& Graph::value(NodeId id) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(id));
  return n.external ? *n.external : n.value;
}

NodeId Graph::constant(Matrix value) { return push(std::move(value), false); }

NodeId Graph::parameter(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return it->second;
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  const auto id = static_cast<NodeId>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return id;
}

NodeId Graph::parameter(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return it->second;
  Node n;
  n.external = &p.value;
  nodes_.push_back(std::move(n));
  const auto id = static_cast<NodeId>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: dimension mismatch");
  const NodeId out = push(av * bv, needs(a) || needs(b));
  if (node(out).needs_grad) {
    node(out).back = [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (needs(a)) grad(a).noalias() += g * value(b).transpose();
      if (needs(b)) grad(b).noalias() += value(a).transpose() * g;
    };
  }
  return out;
}

NodeId Graph::linear(NodeId x, NodeId weight, NodeId bias) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(weight);
  const Matrix& bv = value(bias);
  if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols()) {
    throw std::invalid_argument("linear: dimension mismatch");
  }
  Matrix y = xv * wv;
  y.rowwise() += bv.row(0);
  const NodeId out = push(std::move(y), needs(x) || needs(weight) || needs(bias));
  if (node(out).needs_grad) {
    node(out).back = [this, x, weight, bias, out] {
      const Matrix& g = node(out).grad;
      if (needs(x)) grad(x).noalias() += g * value(weight).transpose();
      if (needs(weight)) grad(weight).noalias() += value(x).transpose() * g;
      if (needs(bias)) grad(bias).row(0) += g.colwise().sum();
    };
  }
  return out;
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  const bool broadcast = bv.rows() == 1 && av.rows() != 1;
  if (av.cols() != bv.cols() || (!broadcast && av.rows() != bv.rows())) {
    throw std::invalid_argument("add: dimension mismatch");
  }
  Matrix y = av;
  if (broadcast) {
    y.rowwise() += bv.row(0);
  } else {
    y += bv;
  }
  const NodeId out = push(std::move(y), needs(a) || needs(b));
  if (node(out).needs_grad) {
    node(out).back = [this, a, b, out, broadcast] {
      const Matrix& g = node(out).grad;
      if (needs(a)) grad(a) += g;
      if (needs(b)) {
        if (broadcast) {
          grad(b).row(0) += g.colwise().sum();
        } else {
          grad(b) += g;
        }
      }
    };
  }
  return out;
}

NodeId Graph::scale(NodeId a, double s) {
  const NodeId out = push(value(a) * s, needs(a));
  if (node(out).needs_grad) {
    node(out).back = [this, a, out, s] { grad(a) += node(out).grad * s; };
  }
  return out;
}

NodeId Graph::relu(NodeId a) {
  const NodeId out = push(value(a).cwiseMax(0.0), needs(a));
  if (node(out).needs_grad) {
    node(out).back = [this, a, out] {
      const Matrix& g = node(out).grad;
      grad(a) += (value(a).array() > 0.0).select(g, 0.0);
    };
  }
  return out;
}

NodeId Graph::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  const Matrix& xv = value(x);
  const Eigen::Index cols = xv.cols();
  if (value(gain).cols() != cols || value(bias).cols() != cols) {
    throw std::invalid_argument("layer_norm: dimension mismatch");
  }
  Matrix xhat(xv.rows(), cols);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std[r];
  }
  Matrix y = xhat.array().rowwise() * value(gain).row(0).array();
  y.rowwise() += value(bias).row(0);
  const NodeId out = push(std::move(y), needs(x) || needs(gain) || needs(bias));
  if (node(out).needs_grad) {
    node(out).back = [this, x, gain, bias, out, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)] {
      const Matrix& g = node(out).grad;
      if (needs(gain)) grad(gain).row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
      if (needs(bias)) grad(bias).row(0) += g.colwise().sum();
      if (needs(x)) {
        const Matrix dxhat = g.array().rowwise() * value(gain).row(0).array();
        Matrix& gx = grad(x);
        for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
          const double m1 = dxhat.row(r).mean();
          const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(dxhat.cols());
          gx.row(r).array() +=
              inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
        }
      }
    };
  }
  return out;
}

NodeId Graph::gather_rows(NodeId table, std::vector<Eigen::Index> rows) {
  const Matrix& t = value(table);
  Matrix y(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= t.rows()) throw std::out_of_range("gather_rows: row index");
    y.row(static_cast<Eigen::Index>(i)) = t.row(rows[i]);
  }
  const NodeId out = push(std::move(y), needs(table));
  if (node(out).needs_grad) {
    node(out).back = [this, table, out, rows = std::move(rows)] {
      const Matrix& g = node(out).grad;
      Matrix& gt = grad(table);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        gt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
      }
    };
  }
  return out;
}

NodeId Graph::concat_rows(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  bool any = false;
  for (NodeId p : parts) {
    if (value(p).cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += value(p).rows();
    any = any || needs(p);
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (NodeId p : parts) {
    y.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  const NodeId out = push(std::move(y), any);
  if (node(out).needs_grad) {
    node(out).back = [this, out, parts = std::vector<NodeId>(parts.begin(), parts.end())] {
      const Matrix& g = node(out).grad;
      Eigen::Index at = 0;
      for (NodeId p : parts) {
        const Eigen::Index n = value(p).rows();
        if (needs(p)) grad(p) += g.middleRows(at, n);
        at += n;
      }
    };
  }
  return out;
}

NodeId Graph::attention(NodeId q, NodeId k, NodeId v, int heads, const AttentionMask& mask) {
  const Matrix& qv = value(q);
  const Matrix& kv = value(k);
  const Matrix& vv = value(v);
  const Eigen::Index d = qv.cols();
  if (heads <= 0 || d % heads != 0 || kv.cols() != d || vv.cols() != d ||
      kv.rows() != vv.rows()) {
    throw std::invalid_argument("attention: dimension mismatch");
  }
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index nq = qv.rows();
  const Eigen::Index nk = kv.rows();

  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix y = Matrix::Zero(nq, d);
  for (int h = 0; h < heads; ++h) {
    Matrix s = qv.middleCols(h * dh, dh) * kv.middleCols(h * dh, dh).transpose() * scale;
    for (Eigen::Index i = 0; i < nq; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < nk; ++j) {
        if (mask.allows(i, j)) {
          mx = std::max(mx, s(i, j));
        }
      }
      double total = 0.0;
      for (Eigen::Index j = 0; j < nk; ++j) {
        const double e = mask.allows(i, j) ? std::exp(s(i, j) - mx) : 0.0;
        s(i, j) = e;
        total += e;
      }
      if (total > 0.0) s.row(i) /= total;
    }
    y.middleCols(h * dh, dh).noalias() = s * vv.middleCols(h * dh, dh);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }

  const NodeId out = push(std::move(y), needs(q) || needs(k) || needs(v));
  if (node(out).needs_grad) {
    node(out).back = [this, q, k, v, out, heads, dh, scale, probs = std::move(probs)] {
      const Matrix& g = node(out).grad;
      for (int h = 0; h < heads; ++h) {
        const Matrix& p = probs[static_cast<std::size_t>(h)];
        const auto go = g.middleCols(h * dh, dh);
        if (needs(v)) grad(v).middleCols(h * dh, dh).noalias() += p.transpose() * go;
        if (!needs(q) && !needs(k)) continue;
        const Matrix dp = go * value(v).middleCols(h * dh, dh).transpose();
        Matrix ds = p.array() * (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
        ds *= scale;
        if (needs(q)) grad(q).middleCols(h * dh, dh).noalias() += ds * value(k).middleCols(h * dh, dh);
        if (needs(k)) {
          grad(k).middleCols(h * dh, dh).noalias() += ds.transpose() * value(q).middleCols(h * dh, dh);
        }
      }
    };
  }
  return out;
}

NodeId Graph::nll(NodeId logits, std::vector<NllTerm> terms) {
  const Matrix& lv = value(logits);
  // Softmax only over the rows the terms touch.
  std::unordered_map<Eigen::Index, RowVector> row_probs;
  double total = 0.0;
  for (const NllTerm& t : terms) {
    if (t.row < 0 || t.row >= lv.rows() || t.target < 0 || t.target >= lv.cols()) {
      throw std::out_of_range("nll: term outside logits");
    }
    auto it = row_probs.find(t.row);
    if (it == row_probs.end()) {
      const double mx = lv.row(t.row).maxCoeff();
      RowVector e = (lv.row(t.row).array() - mx).exp();
      e /= e.sum();
      it = row_probs.emplace(t.row, std::move(e)).first;
    }
    const double mx = lv.row(t.row).maxCoeff();
    const double lse = mx + std::log((lv.row(t.row).array() - mx).exp().sum());
    total += -t.weight * (lv(t.row, t.target) - lse);
  }
  Matrix y(1, 1);
  y(0, 0) = total;
  const NodeId out = push(std::move(y), needs(logits));
  if (node(out).needs_grad) {
    node(out).back = [this, logits, out, terms = std::move(terms),
                      row_probs = std::move(row_probs)] {
      const double g = node(out).grad(0, 0);
      Matrix& gl = grad(logits);
      for (const NllTerm& t : terms) {
        gl.row(t.row) += (g * t.weight) * row_probs.at(t.row);
        gl(t.row, t.target) -= g * t.weight;
      }
    };
  }
  return out;
}

void Graph::backward(NodeId root, double seed) {
  if (!record_) throw std::logic_error("backward on a graph without recording");
  const Matrix& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1) throw std::invalid_argument("backward: root is not scalar");
  if (!needs(root)) return;
  grad(root)(0, 0) += seed;
  for (auto id = root; id >= 0; --id) {
    Node& n = node(id);
    if (n.grad.size() == 0) continue;
    if (n.back) n.back();
  }
  for (auto& n : nodes_) {
    if (n.param && n.grad.size() != 0) {
      if (n.param->grad.size() == 0) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace kpset::ad

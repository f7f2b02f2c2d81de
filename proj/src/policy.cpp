#include "cramkit/policy.hpp"

#include <cmath>
#include <sstream>
#include <variant>

namespace cramkit {

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

LinearCate::LinearCate(double intercept, std::vector<double> slope)
    : intercept_(intercept), slope_(std::move(slope)) {}

double LinearCate::predict(std::span<const double> x) const {
  double acc = intercept_;
  for (std::size_t k = 0; k < slope_.size(); ++k) acc += slope_[k] * x[k];
  return acc;
}

std::string LinearCate::describe() const {
  std::string out = "(linear " + format_number(intercept_) + " [";
  for (std::size_t k = 0; k < slope_.size(); ++k) {
    if (k) out += ' ';
    out += format_number(slope_[k]);
  }
  return out + "])";
}

struct ConstantNode {
  double prob;
};

struct ThresholdNode {
  std::shared_ptr<const CateModel> model;
  double threshold;
};

struct MixtureNode {
  double weight;
  Policy newer;
  Policy older;
  std::size_t dim;
  std::size_t depth;
};

struct Policy::Node {
  std::variant<ConstantNode, ThresholdNode, MixtureNode> body;
};

Policy Policy::constant(double prob) {
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw Error(ErrorKind::domain, "constant policy probability must lie in [0, 1]");
  }
  return Policy(std::make_shared<const Node>(Node{ConstantNode{prob}}));
}

Policy Policy::cate_threshold(std::shared_ptr<const CateModel> model, double threshold) {
  if (!model) throw Error(ErrorKind::domain, "threshold policy needs a CATE model");
  if (!std::isfinite(threshold)) throw Error(ErrorKind::domain, "threshold must be finite");
  return Policy(std::make_shared<const Node>(Node{ThresholdNode{std::move(model), threshold}}));
}

double Policy::operator()(std::span<const double> x) const {
  const Node* node = node_.get();
  const std::size_t need = dim();
  if (need != 0 && x.size() != need) {
    throw Error(ErrorKind::shape, "policy expects " + std::to_string(need) +
                                      " covariates, got " + std::to_string(x.size()));
  }
  // Mixture chains are walked iteratively: value = sum_k scale_k * leaf_k.
  double scale = 1.0;
  double value = 0.0;
  while (true) {
    if (const auto* c = std::get_if<ConstantNode>(&node->body)) {
      return value + scale * c->prob;
    }
    if (const auto* t = std::get_if<ThresholdNode>(&node->body)) {
      return value + (t->model->predict(x) > t->threshold ? scale : 0.0);
    }
    const auto& m = std::get<MixtureNode>(node->body);
    value += scale * m.weight * m.newer(x);
    scale *= 1.0 - m.weight;
    node = m.older.node_.get();
  }
}

Policy::Kind Policy::kind() const noexcept {
  switch (node_->body.index()) {
    case 0: return Kind::constant;
    case 1: return Kind::cate_threshold;
    default: return Kind::mixture;
  }
}

std::size_t Policy::dim() const noexcept {
  if (std::holds_alternative<ConstantNode>(node_->body)) return 0;
  if (const auto* t = std::get_if<ThresholdNode>(&node_->body)) return t->model->dim();
  return std::get<MixtureNode>(node_->body).dim;
}

std::size_t Policy::depth() const noexcept {
  if (const auto* m = std::get_if<MixtureNode>(&node_->body)) return m->depth;
  return 0;
}

std::string Policy::to_string() const {
  if (const auto* c = std::get_if<ConstantNode>(&node_->body)) {
    return "(constant " + format_number(c->prob) + ")";
  }
  if (const auto* t = std::get_if<ThresholdNode>(&node_->body)) {
    return "(threshold " + format_number(t->threshold) + " " + t->model->describe() + ")";
  }
  const auto& m = std::get<MixtureNode>(node_->body);
  return "(mixture " + format_number(m.weight) + " " + m.newer.to_string() + " " +
         m.older.to_string() + ")";
}

Policy mix_policies(double p, const Policy& newer, const Policy& older) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::domain, "mixture weight must lie in [0, 1], got " + std::to_string(p));
  }
  if (p == 1.0) return newer;
  if (p == 0.0) return older;
  const std::size_t a = newer.dim();
  const std::size_t b = older.dim();
  if (a != 0 && b != 0 && a != b) {
    throw Error(ErrorKind::shape, "cannot mix policies of dimension " + std::to_string(a) +
                                      " and " + std::to_string(b));
  }
  const std::size_t depth = 1 + std::max(newer.depth(), older.depth());
  return Policy(std::make_shared<const Policy::Node>(
      Policy::Node{MixtureNode{p, newer, older, a != 0 ? a : b, depth}}));
}

double l1_policy_distance(const Policy& a, const Policy& b, const CovariateMatrix& reference) {
  if (reference.empty()) throw Error(ErrorKind::domain, "reference sample is empty");
  if (a.same_node(b)) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < reference.rows(); ++i) {
    const auto x = reference.row(i);
    acc += std::abs(a(x) - b(x));
  }
  return acc / static_cast<double>(reference.rows());
}

std::vector<double> evaluate_rows(const Policy& policy, const CovariateMatrix& x) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = policy(x.row(i));
  return out;
}

}  // namespace cramkit

#include "esrgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "esrgan/errors.hpp"

namespace esrgan {

namespace {
thread_local bool g_grad_mode = true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(shape, 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return from_data(shape, std::vector<double>(shape.numel(), value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (data.size() != shape.numel()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                         shape.str());
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data(Shape{1, 1, 1, 1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  static const Shape kEmpty{};
  return node_ ? node_->shape : kEmpty;
}

std::span<const double> Tensor::data() const {
  if (!node_) return {};
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) return {};
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() requires a single-element tensor, got " + shape().str());
  return node_->data[0];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const Shape& s = shape();
  return node_->data[((n * s.c + c) * s.h + h) * s.w + w];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (node_) node_->requires_grad = value;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->data = node_->data;
  return Tensor(std::move(node));
}

Tensor Tensor::clone() const {
  Tensor copy = detach();
  if (copy.node_) copy.node_->requires_grad = requires_grad();
  return copy;
}

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                           detail::BackwardFn backward) {
  Tensor out = from_data(shape, std::move(data));
  if (!g_grad_mode) return out;
  const bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node_);
  out.node_->backward = std::move(backward);
  return out;
}

void Tensor::backward() const {
  if (!node_) throw DimensionError("backward() on an undefined tensor");
  if (node_->data.size() != 1) {
    throw DimensionError("backward() requires a scalar loss, got shape " + node_->shape.str());
  }
  if (!node_->requires_grad) return;

  // Post-order DFS restricted to nodes that carry gradients.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Gradients of this sweep are kept apart from the persistent .grad so that
  // repeated sweeps over one graph add exactly one contribution each.
  std::unordered_map<detail::Node*, std::vector<double>> pass;
  pass[node_.get()] = {1.0};
  std::vector<std::vector<double>*> parent_bufs;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    auto found = pass.find(node);
    if (found == pass.end()) continue;
    std::vector<double> upstream = std::move(found->second);
    pass.erase(found);

    if (node->backward) {
      parent_bufs.assign(node->parents.size(), nullptr);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        detail::Node* parent = node->parents[i].get();
        if (!parent || !parent->requires_grad) continue;
        auto& buf = pass[parent];
        if (buf.empty()) buf.assign(parent->data.size(), 0.0);
        parent_bufs[i] = &buf;
      }
      node->backward(upstream, parent_bufs);
    }

    if (node->grad.empty()) {
      node->grad = std::move(upstream);
    } else {
      for (std::size_t i = 0; i < upstream.size(); ++i) node->grad[i] += upstream[i];
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

bool grad_mode_enabled() { return g_grad_mode; }

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!all_finite(t.data())) throw NumericalError("non-finite value in " + what);
}

}  // namespace esrgan

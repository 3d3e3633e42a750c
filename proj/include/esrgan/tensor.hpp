#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace esrgan {

/// NCHW extents of a dense 4-D tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  std::string str() const;
  bool operator==(const Shape&) const = default;
};

namespace detail {

/// Receives the upstream gradient of a node and adds contributions into the
/// gradient buffers of its parents. A parent that does not require gradients
/// gets a null buffer.
using BackwardFn =
    std::function<void(std::span<const double> upstream, std::span<std::vector<double>*> parent_grads)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until populated by backward()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

}  // namespace detail

/// Dense float64 NCHW tensor with optional reverse-mode gradient tracking.
///
/// A Tensor is a cheap handle; copies share storage and graph position. Use
/// clone() for an independent copy of the data. Graphs are built eagerly by
/// the differentiable ops in ops.hpp and live as long as some handle to the
/// result is held.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<const double> data() const;
  /// Writes go straight to storage and are invisible to any graph already
  /// built from this tensor; only mutate leaves between iterations.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Same values, no graph history, no gradient tracking.
  Tensor detach() const;
  Tensor clone() const;

  /// Reverse-mode sweep from this scalar. Gradients of every reachable
  /// tensor that requires them are accumulated (not overwritten).
  void backward() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  /// Creates the output of a differentiable op. When no parent requires
  /// gradients (or gradient mode is off) the result is a plain leaf.
  static Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                            detail::BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph construction on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Throws NumericalError naming `what` if any element is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);
bool all_finite(std::span<const double> values);

}  // namespace esrgan

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dmrl {

class Tape;

struct TensorImpl {
  std::vector<size_t> shape;
  std::vector<double> data;      // row-major, length == product(shape)
  bool requires_grad = false;
  std::vector<double> grad;      // empty until first accumulated into
  Tape* tape = nullptr;          // producing tape; null for leaves and constants
  int64_t tape_id = -1;
};

// Dense n-dimensional array of 64-bit floats. Copying a Tensor copies the
// handle, not the buffer. A Tensor not attached to a live tape is a plain
// immutable value and safe to share across threads.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<size_t> shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<size_t> shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<size_t>& shape() const;
  size_t rank() const;
  size_t dim(size_t axis) const;
  size_t numel() const;
  bool requires_grad() const;
  void set_requires_grad(bool v);

  const std::vector<double>& data() const;
  std::vector<double>& data();
  bool has_grad() const;
  const std::vector<double>& grad() const;   // throws when no grad has been accumulated
  std::vector<double>& grad_buffer();        // allocates a zero buffer on demand
  void zero_grad();

  double item() const;                       // requires numel() == 1
  Tensor detach() const;                     // constant copy of the current values

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

struct TapeNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  std::vector<double> grad;                  // d(root)/d(output), scratch per backward
  std::function<void(Tape&, TapeNode&)> backward;
};

// Records operations in creation order; creation order is the topological
// order, and backward walks it strictly in reverse exactly once per call.
// Constructing a Tape makes it the active tape for the current thread;
// destruction restores the previous one and detaches every tensor this tape
// produced, so handles that outlive the tape degrade to constants.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // Accumulates d(root)/d(leaf) into the grad of every requires_grad leaf
  // reachable from root. Calling twice without zeroing doubles leaf grads.
  void backward(const Tensor& root);

  int64_t record(const char* op, std::vector<std::shared_ptr<TensorImpl>> inputs,
                 const std::shared_ptr<TensorImpl>& output,
                 std::function<void(Tape&, TapeNode&)> backward_fn);

  // Routes a gradient contribution to where t keeps its gradient: the
  // producing node's scratch buffer for intermediates, the persistent grad
  // for requires_grad leaves, nowhere otherwise.
  void accumulate(const std::shared_ptr<TensorImpl>& t, const double* g, size_t n);

  size_t size() const { return nodes_.size(); }
  const TapeNode& node(size_t i) const { return nodes_[i]; }

 private:
  std::vector<TapeNode> nodes_;
  Tape* prev_ = nullptr;
};

// Suspends recording for the enclosed scope.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* prev_ = nullptr;
};

// True when t feeds gradients into the active tape.
bool grad_path(const Tensor& t);

std::string shape_string(const std::vector<size_t>& shape);
size_t shape_numel(const std::vector<size_t>& shape);

}  // namespace dmrl

#include "dmrl/tensor.hpp"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace dmrl {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data, bool requires_grad) {
  for (size_t d : shape) {
    if (d == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_string(shape) + " does not match data length " +
                                std::to_string(data.size()));
  }
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<size_t> shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

const std::vector<size_t>& Tensor::shape() const { return impl_->shape; }
size_t Tensor::rank() const { return impl_->shape.size(); }

size_t Tensor::dim(size_t axis) const {
  if (axis >= impl_->shape.size()) throw std::out_of_range("Tensor::dim: axis out of range");
  return impl_->shape[axis];
}

size_t Tensor::numel() const { return impl_->data.size(); }
bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool v) { impl_->requires_grad = v; }

const std::vector<double>& Tensor::data() const { return impl_->data; }
std::vector<double>& Tensor::data() { return impl_->data; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) throw std::logic_error("Tensor::grad: no gradient has been accumulated");
  return impl_->grad;
}

std::vector<double>& Tensor::grad_buffer() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("Tensor::item: tensor of shape " + shape_string(impl_->shape) + " is not scalar");
  return impl_->data[0];
}

Tensor Tensor::detach() const {
  Tensor out;
  out.impl_ = std::make_shared<TensorImpl>();
  out.impl_->shape = impl_->shape;
  out.impl_->data = impl_->data;
  return out;
}

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() {
  for (TapeNode& node : nodes_) {
    if (node.output) {
      node.output->tape = nullptr;
      node.output->tape_id = -1;
    }
  }
  g_active_tape = prev_;
}

Tape* Tape::active() { return g_active_tape; }

int64_t Tape::record(const char* op, std::vector<std::shared_ptr<TensorImpl>> inputs,
                     const std::shared_ptr<TensorImpl>& output,
                     std::function<void(Tape&, TapeNode&)> backward_fn) {
  int64_t id = static_cast<int64_t>(nodes_.size());
  output->tape = this;
  output->tape_id = id;
  TapeNode node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.output = output;
  node.backward = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  return id;
}

void Tape::accumulate(const std::shared_ptr<TensorImpl>& t, const double* g, size_t n) {
  if (t->tape == this && t->tape_id >= 0) {
    TapeNode& node = nodes_[static_cast<size_t>(t->tape_id)];
    if (node.grad.empty()) node.grad.assign(t->data.size(), 0.0);
    for (size_t i = 0; i < n; ++i) node.grad[i] += g[i];
  } else if (t->requires_grad) {
    if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
    for (size_t i = 0; i < n; ++i) t->grad[i] += g[i];
  }
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw std::invalid_argument("Tape::backward: root must be a scalar, got shape " +
                                (root.defined() ? shape_string(root.shape()) : std::string("<undefined>")));
  }
  const auto& impl = root.impl();
  if (impl->tape != this || impl->tape_id < 0) {
    throw std::invalid_argument("Tape::backward: root was not produced on this tape");
  }
  // Test hook: DMRL_CORRUPT_BACKWARD=<op tag> perturbs gradients flowing
  // through matching nodes so checking tools can prove they catch a broken
  // backward. Never set outside tests.
  static const char* corrupt_op = std::getenv("DMRL_CORRUPT_BACKWARD");

  for (TapeNode& node : nodes_) node.grad.clear();
  const size_t root_id = static_cast<size_t>(impl->tape_id);
  nodes_[root_id].grad.assign(1, 1.0);
  for (size_t i = root_id + 1; i-- > 0;) {
    TapeNode& node = nodes_[i];
    if (node.grad.empty()) continue;  // does not contribute to root
    if (corrupt_op && std::strcmp(node.op, corrupt_op) == 0) {
      for (double& v : node.grad) v *= 1.01;
    }
    if (node.backward) node.backward(*this, node);
  }
}

NoGradGuard::NoGradGuard() {
  prev_ = g_active_tape;
  g_active_tape = nullptr;
}

NoGradGuard::~NoGradGuard() { g_active_tape = prev_; }

bool grad_path(const Tensor& t) {
  if (!t.defined()) return false;
  const auto& impl = t.impl();
  if (impl->requires_grad) return true;
  return impl->tape != nullptr && impl->tape == Tape::active() && impl->tape_id >= 0;
}

}  // namespace dmrl

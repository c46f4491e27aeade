#pragma once

// Minimal dense tensor with reverse-mode autodiff. A Tensor is a cheap
// handle onto shared storage; ops executed under an active Tape record
// backward closures that accumulate gradients when backward() replays
// the tape in reverse.

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace litenext {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GradError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}
}  // namespace detail

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, T fill = T(0),
                  bool requires_grad = false)
      : s_(std::make_shared<Storage>()) {
    s_->shape = std::move(shape);
    int64_t n = 1;
    for (int d : s_->shape) {
      if (d <= 0) throw ShapeError("Tensor: non-positive extent in " +
                                   detail::shape_str(s_->shape));
      n *= d;
    }
    s_->data.assign(n, fill);
    s_->requires_grad = requires_grad;
  }

  static Tensor scalar(T v) {
    Tensor t({1});
    t.data()[0] = v;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<T> values) {
    Tensor t(std::move(shape));
    if ((int64_t)values.size() != t.size())
      throw ShapeError("Tensor::from: value count " +
                       std::to_string(values.size()) + " does not match " +
                       detail::shape_str(t.shape()));
    t.s_->data = std::move(values);
    return t;
  }

  bool defined() const { return s_ != nullptr; }
  const std::vector<int>& shape() const { return s_->shape; }
  int dim(int i) const { return s_->shape.at(i); }
  int rank() const { return (int)s_->shape.size(); }
  int64_t size() const { return (int64_t)s_->data.size(); }

  T* data() { return s_->data.data(); }
  const T* data() const { return s_->data.data(); }
  std::vector<T>& vec() { return s_->data; }
  const std::vector<T>& vec() const { return s_->data; }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool v) const { s_->requires_grad = v; }

  bool has_grad() const { return !s_->grad.empty(); }
  void ensure_grad() const {
    if (s_->grad.empty()) s_->grad.assign(s_->data.size(), T(0));
  }
  T* grad() const { return s_->grad.data(); }
  std::vector<T>& grad_vec() const { return s_->grad; }
  void zero_grad() const { s_->grad.clear(); }

  T item() const {
    if (size() != 1)
      throw ShapeError("item(): tensor has " + std::to_string(size()) +
                       " elements");
    return s_->data[0];
  }

  // Storage identity, for graph bookkeeping.
  const void* id() const { return s_.get(); }

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<T> data;
    mutable std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

// One tape per training step; single-threaded, innermost-active.
template <typename T>
class Tape {
 public:
  Tape() : prev_(current_) { current_ = this; }
  ~Tape() { current_ = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current() { return current_; }

  void record(std::function<void()> backward_fn) {
    records_.push_back(std::move(backward_fn));
  }

  void run_backward(const Tensor<T>& loss) {
    if (loss.size() != 1)
      throw GradError("backward: loss must be a scalar tensor");
    if (consumed_)
      throw GradError("backward: tape already consumed; reset required");
    consumed_ = true;
    loss.ensure_grad();
    loss.grad()[0] = T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

  size_t num_records() const { return records_.size(); }

 private:
  std::vector<std::function<void()>> records_;
  bool consumed_ = false;
  Tape* prev_;
  inline static thread_local Tape* current_ = nullptr;
};

// Suppresses recording (and requires_grad propagation) while alive.
class NoGrad {
 public:
  NoGrad() { ++depth_; }
  ~NoGrad() { --depth_; }
  NoGrad(const NoGrad&) = delete;
  static bool active() { return depth_ > 0; }

 private:
  inline static thread_local int depth_ = 0;
};

template <typename T>
bool grad_enabled() {
  return Tape<T>::current() != nullptr && !NoGrad::active();
}

template <typename T>
void backward(const Tensor<T>& loss) {
  auto* tape = Tape<T>::current();
  if (!tape) throw GradError("backward: no active tape");
  tape->run_backward(loss);
}

}  // namespace litenext

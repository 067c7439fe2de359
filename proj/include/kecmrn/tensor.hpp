#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kecmrn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something writes a gradient
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t tape_id = 0;  // producing tape; 0 for leaves
  std::size_t tape_index = 0;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T{0});
    return grad;
  }
};

}  // namespace detail

// Dense row-major array with shared-handle semantics: copies alias the same
// storage, `detach()` makes an independent leaf.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = detail::Node<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }
  static Tensor from_node(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rows() const { return node_->shape.at(0); }
  std::size_t cols() const { return node_->shape.back(); }

  std::span<const T> data() const { return node_->value; }
  // Direct write access; only meaningful on leaves (parameters, inputs).
  std::span<T> mutable_data() { return node_->value; }

  T item() const;
  T at(std::size_t i) const { return node_->value[i]; }
  T at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  bool is_leaf() const { return node_->leaf; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.assign(node_->value.size(), T{0}); }

  Tensor detach() const { return Tensor(node_->shape, node_->value); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Ordered record of the differentiable operations executed while the tape is
// active. Entries are appended in execution order, so inputs always precede
// the nodes computed from them.
template <typename T>
class Tape {
 public:
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  struct Entry {
    std::vector<NodePtr> inputs;
    NodePtr output;
    std::function<void()> backward;
  };

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }

  void record(std::vector<NodePtr> inputs, const NodePtr& output, std::function<void()> backward);

  // Reverse sweep from `loss`. Leaf gradients accumulate; intermediate
  // gradients are reset first. Every requires-grad leaf seen by the tape ends
  // up with an allocated (possibly zero) gradient.
  void backward(const Tensor<T>& loss);

  // Entries visited by the last backward sweep.
  std::size_t last_visit_count() const noexcept { return visits_; }

 private:
  std::uint64_t id_;
  std::vector<Entry> entries_;
  std::size_t visits_ = 0;
};

template <typename T>
Tape<T>*& active_tape() noexcept {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}

// Makes `tape` the recording target for the current thread until destroyed.
template <typename T>
class RecordingScope {
 public:
  explicit RecordingScope(Tape<T>& tape) : previous_(active_tape<T>()) { active_tape<T>() = &tape; }
  ~RecordingScope() { active_tape<T>() = previous_; }
  RecordingScope(const RecordingScope&) = delete;
  RecordingScope& operator=(const RecordingScope&) = delete;

 private:
  Tape<T>* previous_;
};

// Suspends recording on the current thread.
template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(active_tape<T>()) { active_tape<T>() = nullptr; }
  ~NoGradScope() { active_tape<T>() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

// Fingerprint of the discrete branch decisions (ReLU signs, top-k picks)
// taken on the current thread while the trace is open. Traces nest; only the
// innermost one records.
class DecisionTrace {
 public:
  DecisionTrace() : previous_(current()) { current() = this; }
  ~DecisionTrace() { current() = previous_; }
  DecisionTrace(const DecisionTrace&) = delete;
  DecisionTrace& operator=(const DecisionTrace&) = delete;

  std::uint64_t digest() const noexcept { return digest_; }

  static bool active() noexcept { return current() != nullptr; }
  static void note(std::uint64_t value) noexcept {
    if (DecisionTrace* t = current()) t->digest_ = (t->digest_ ^ value) * 0x100000001b3ULL;
  }

 private:
  static DecisionTrace*& current() noexcept {
    thread_local DecisionTrace* trace = nullptr;
    return trace;
  }

  DecisionTrace* previous_;
  std::uint64_t digest_ = 0xcbf29ce484222325ULL;
};

// Backward over the currently active tape.
template <typename T>
void backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace kecmrn

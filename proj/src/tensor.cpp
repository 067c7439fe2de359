#include "kecmrn/tensor.hpp"

#include <atomic>
#include <sstream>

#include "kecmrn/errors.hpp"

namespace kecmrn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<Node>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  node_->value.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<Node>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " holds " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw DimensionError("item() on non-scalar tensor " + shape_string(shape()));
  return node_->value[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (!node_->leaf) throw ContractError("requires_grad can only be toggled on leaf tensors");
  node_->requires_grad = on;
  return *this;
}

namespace {
std::atomic<std::uint64_t> next_tape_id{1};
}

template <typename T>
Tape<T>::Tape() : id_(next_tape_id.fetch_add(1)) {}

template <typename T>
void Tape<T>::record(std::vector<NodePtr> inputs, const NodePtr& output, std::function<void()> backward) {
  output->leaf = false;
  output->requires_grad = true;
  output->tape_id = id_;
  output->tape_index = entries_.size();
  entries_.push_back(Entry{std::move(inputs), output, std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined tensor")));
  }
  const auto& root = loss.node();
  if (root->leaf) {
    if (!root->requires_grad) throw ContractError("backward: loss is not on the tape");
    root->grad_buffer()[0] += T{1};
    visits_ = 0;
    return;
  }
  if (root->tape_id != id_) throw ContractError("backward: loss was recorded on a different tape");

  for (auto& e : entries_) {
    e.output->grad.clear();
    for (auto& in : e.inputs) {
      if (in->leaf && in->requires_grad) in->grad_buffer();
    }
  }
  root->grad_buffer()[0] = T{1};

  visits_ = 0;
  for (std::size_t i = root->tape_index + 1; i-- > 0;) {
    ++visits_;
    Entry& e = entries_[i];
    if (e.output->grad.empty()) continue;
    e.backward();
  }
}

template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) throw ContractError("backward called with no active tape");
  tape->backward(loss);
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace kecmrn

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace segvit {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& shape);
int64_t shape_numel(const Shape& shape);

template <typename T>
class Tensor;

// Eigen's vectorized kernels pick their summation order from the data
// address, so every buffer starts on a 64-byte boundary to keep results
// independent of where the allocator happened to put it.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

namespace detail {

// One vertex of the dynamic tape. Leaves have no inputs and no backward.
template <typename T>
struct Node {
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  T* grad_data() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad.data();
  }
  bool is_leaf() const { return !backward; }
};

// Wraps a freshly computed value as a tensor. The inputs and backward closure
// are only retained when grad mode is on and some input participates.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, Buffer<T> value,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward);

}  // namespace detail

// Thread-local switch for graph recording.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major array with optional participation in reverse-mode
// differentiation. Copies share the same underlying node.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor from_data(Shape shape, std::vector<T> data);
  static Tensor scalar(T value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t rank() const { return static_cast<int64_t>(shape().size()); }
  // Negative axes count from the back.
  int64_t dim(int64_t axis) const;
  int64_t numel() const;

  std::span<const T> data() const;
  // Only leaves may be written in place; ops on tracked tensors are pure.
  std::span<T> mutable_data();
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  T item() const;
  T at(std::initializer_list<int64_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  void zero_grad();
  // Reverse sweep from a scalar. Leaf gradients accumulate across calls.
  void backward() const;
  // Same values, cut from the tape.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::Node<T>>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node<T>> node_;

  friend Tensor detail::make_result<T>(const char*, Shape, Buffer<T>,
                                       std::vector<Tensor>,
                                       std::function<void(detail::Node<T>&)>);
};

// Throws NumericError when any value is NaN or infinite.
template <typename T>
void check_finite(std::span<const T> values, const char* where);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace segvit

#include "c2f/tensor.hpp"

#include <cmath>

namespace c2f {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, int begin, int end) {
  if (begin < 0 || end > t.n() || begin >= end) {
    throw ShapeError("batch slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + t.shape().str());
  }
  Shape s = t.shape();
  s.n = end - begin;
  const std::size_t per = static_cast<std::size_t>(s.c) * s.h * s.w;
  std::vector<T> data(t.data().begin() + begin * per, t.data().begin() + end * per);
  return Tensor<T>(s, std::move(data));
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int begin, int end) {
  if (begin < 0 || end > t.c() || begin >= end) {
    throw ShapeError("channel slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + t.shape().str());
  }
  Shape s = t.shape();
  s.c = end - begin;
  Tensor<T> out(s);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(t.plane(n, begin), plane * s.c, out.plane(n, 0));
  }
  return out;
}

template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items) {
  if (items.empty()) throw ShapeError("stack_batch of an empty list");
  Shape s = items.front().shape();
  std::vector<T> data;
  data.reserve(s.numel() * items.size());
  int total = 0;
  for (const auto& t : items) {
    if (t.c() != s.c || t.h() != s.h || t.w() != s.w) {
      throw ShapeError("stack_batch: " + t.shape().str() + " does not match " + s.str());
    }
    data.insert(data.end(), t.data().begin(), t.data().end());
    total += t.n();
  }
  s.n = total;
  return Tensor<T>(s, std::move(data));
}

#define C2F_INSTANTIATE(T)                                                 \
  template bool all_finite(const Tensor<T>&);                              \
  template Tensor<T> slice_batch(const Tensor<T>&, int, int);              \
  template Tensor<T> slice_channels(const Tensor<T>&, int, int);           \
  template Tensor<T> stack_batch(std::span<const Tensor<T>>);

C2F_INSTANTIATE(float)
C2F_INSTANTIATE(double)

}  // namespace c2f

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sgmatch/errors.hpp"
#include "sgmatch/rng.hpp"

namespace sgmatch {

// Dense row-major tensor. Training runs with T = float; gradient checks can
// instantiate the same code with T = double.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)),
        data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                              std::multiplies<>()),
              fill) {}

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor row_vector(std::vector<T> values) {
    Tensor t({1, values.size()});
    t.data_ = std::move(values);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // 2-D views; rank-1 tensors count as a single row.
  std::size_t rows() const { return rank() >= 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    if (rank() >= 2) return shape_[1];
    return rank() == 1 ? shape_[0] : 0;
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void fill_gaussian(SeededRng& rng, double std_dev) {
    for (auto& x : data_) x = static_cast<T>(rng.normal() * std_dev);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Same data, new shape; sizes must agree.
  Tensor reshaped(std::vector<std::size_t> shape) const {
    Tensor t;
    t.shape_ = std::move(shape);
    std::size_t n = std::accumulate(t.shape_.begin(), t.shape_.end(),
                                    std::size_t{1}, std::multiplies<>());
    if (n != data_.size())
      throw ShapeMismatch("reshape: size " + std::to_string(data_.size()) +
                          " to " + std::to_string(n));
    t.data_ = data_;
    return t;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i)
      os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
};

// Named parameter map with paired gradients. std::map keeps iteration in
// sorted-name order, which fixes init, update, checkpoint, and sampling
// order, and keeps Param addresses stable across inserts.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, Tensor<T> value) {
    if (entries_.count(name))
      throw ConfigError("duplicate parameter name: " + name);
    Param<T> p;
    p.grad = Tensor<T>::zeros(value.shape());
    p.value = std::move(value);
    return entries_.emplace(name, std::move(p)).first->second;
  }

  Param<T>& get(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw IndexOutOfRange("no parameter named " + name);
    return it->second;
  }

  const Param<T>& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw IndexOutOfRange("no parameter named " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  void zero_grads() {
    for (auto& [name, p] : entries_) p.grad.fill(T(0));
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : entries_) n += p.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t count() const { return entries_.size(); }

 private:
  std::map<std::string, Param<T>> entries_;
};

}  // namespace sgmatch

#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "nhl/errors.hpp"

namespace nhl {

// Dense row-major tensor, (N,C,H,W) for feature maps or (N,F) for vectors.
template <typename T>
struct Tensor {
  std::vector<long long> dims;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<long long> d, T fill = T(0))
      : dims(std::move(d)),
        data(static_cast<size_t>(std::accumulate(dims.begin(), dims.end(), 1LL,
                                                 [](long long a, long long b) { return a * b; })),
             fill) {}

  static Tensor zeros(std::vector<long long> d) { return Tensor(std::move(d)); }

  long long size() const { return static_cast<long long>(data.size()); }
  int rank() const { return static_cast<int>(dims.size()); }
  long long dim(int i) const { return dims[static_cast<size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  bool same_dims(const Tensor& other) const { return dims == other.dims; }

  T& at2(long long n, long long f) { return data[static_cast<size_t>(n * dims[1] + f)]; }
  const T& at2(long long n, long long f) const { return data[static_cast<size_t>(n * dims[1] + f)]; }
  T& at4(long long n, long long c, long long h, long long w) {
    return data[static_cast<size_t>(((n * dims[1] + c) * dims[2] + h) * dims[3] + w)];
  }
  const T& at4(long long n, long long c, long long h, long long w) const {
    return data[static_cast<size_t>(((n * dims[1] + c) * dims[2] + h) * dims[3] + w)];
  }
};

template <typename T>
void require_rank(const Tensor<T>& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw ValidationError("ShapeMismatch",
                          std::string(what) + ": expected rank " + std::to_string(rank) + " tensor, got rank " +
                              std::to_string(t.rank()));
  }
}

}  // namespace nhl

#pragma once

#include <cmath>
#include <cstddef>

namespace pfgt::kernels_ref {

// Serial textbook implementations of the heavy kernels. Tests compare the
// OpenMP versions in kernels.hpp against these; the benchmark times both.

template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) {
        acc += a[static_cast<std::size_t>(i) * k + p] * b[static_cast<std::size_t>(p) * n + j];
      }
      c[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) {
        acc += a[static_cast<std::size_t>(i) * k + p] * b[static_cast<std::size_t>(j) * k + p];
      }
      c[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < m; ++p) {
        acc += a[static_cast<std::size_t>(p) * k + i] * b[static_cast<std::size_t>(p) * n + j];
      }
      c[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

template <typename T>
void gelu(const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * T(0.7071067811865475244)));
  }
}

template <typename T>
void layer_norm_rows(const T* x, const T* gamma, const T* beta, T* y, int m, int n, T eps) {
  for (int i = 0; i < m; ++i) {
    const T* xrow = x + static_cast<std::size_t>(i) * n;
    T* yrow = y + static_cast<std::size_t>(i) * n;
    T mu = T(0);
    for (int j = 0; j < n; ++j) mu += xrow[j];
    mu /= T(n);
    T var = T(0);
    for (int j = 0; j < n; ++j) var += (xrow[j] - mu) * (xrow[j] - mu);
    var /= T(n);
    const T rs = T(1) / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) yrow[j] = (xrow[j] - mu) * rs * gamma[j] + beta[j];
  }
}

template <typename T>
void softmax_rows(const T* x, T* y, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const T* xrow = x + static_cast<std::size_t>(i) * n;
    T* yrow = y + static_cast<std::size_t>(i) * n;
    T mx = xrow[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, xrow[j]);
    T sum = T(0);
    for (int j = 0; j < n; ++j) {
      yrow[j] = std::exp(xrow[j] - mx);
      sum += yrow[j];
    }
    for (int j = 0; j < n; ++j) yrow[j] /= sum;
  }
}

}  // namespace pfgt::kernels_ref

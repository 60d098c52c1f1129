#pragma once

#include <cmath>
#include <cstddef>

namespace pfgt::kernels {

// Dense kernels on raw row-major buffers. Parallel loops split only over
// independent output rows/elements with schedule(static), so results are
// bit-identical for any thread count. kernels_ref.hpp holds the serial
// textbook versions used to cross-check these.

// C[m,n] = A[m,k] * B[k,n], added onto C when accumulate is set.
template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<long>(m) * n * k > 16384)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    }
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] = A[m,k] * B[n,k]^T  (rows of A dotted with rows of B).
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<long>(m) * n * k > 16384)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

// C[k,n] = A[m,k]^T * B[m,n].
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
#pragma omp parallel for schedule(static) if (k > 1 && static_cast<long>(m) * n * k > 16384)
  for (int i = 0; i < k; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    }
    for (int p = 0; p < m; ++p) {
      const T av = a[static_cast<std::size_t>(p) * k + i];
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > 65536)
  for (long i = 0; i < static_cast<long>(n); ++i) out[i] = a[i] + b[i];
}

// X[m,n] + row vector b[n], broadcast over rows.
template <typename T>
void add_rowvec(const T* x, const T* b, T* out, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 4 && static_cast<long>(m) * n > 65536)
  for (int i = 0; i < m; ++i) {
    const T* xrow = x + static_cast<std::size_t>(i) * n;
    T* orow = out + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) orow[j] = xrow[j] + b[j];
  }
}

template <typename T>
void scale(const T* a, T s, T* out, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > 65536)
  for (long i = 0; i < static_cast<long>(n); ++i) out[i] = a[i] * s;
}

template <typename T>
void axpy(T s, const T* a, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += s * a[i];
}

// Exact GELU: x * Phi(x) with Phi the standard normal CDF.
template <typename T>
inline T gelu_one(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475244)));
}

template <typename T>
inline T gelu_grad_one(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
  const T pdf = T(0.3989422804014326779) * std::exp(T(-0.5) * x * x);
  return cdf + x * pdf;
}

template <typename T>
void gelu(const T* x, T* out, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > 8192)
  for (long i = 0; i < static_cast<long>(n); ++i) out[i] = gelu_one(x[i]);
}

template <typename T>
void gelu_backward(const T* x, const T* dout, T* dx, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > 8192)
  for (long i = 0; i < static_cast<long>(n); ++i) dx[i] += dout[i] * gelu_grad_one(x[i]);
}

// Row-wise layer normalization with affine terms. Saves per-row mean and
// reciprocal stddev for the backward pass.
template <typename T>
void layer_norm_rows(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd,
                     int m, int n, T eps) {
#pragma omp parallel for schedule(static) if (m > 4)
  for (int i = 0; i < m; ++i) {
    const T* xrow = x + static_cast<std::size_t>(i) * n;
    T* yrow = y + static_cast<std::size_t>(i) * n;
    T mu = T(0);
    for (int j = 0; j < n; ++j) mu += xrow[j];
    mu /= T(n);
    T var = T(0);
    for (int j = 0; j < n; ++j) {
      const T d = xrow[j] - mu;
      var += d * d;
    }
    var /= T(n);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[i] = mu;
    rstd[i] = rs;
    for (int j = 0; j < n; ++j) yrow[j] = (xrow[j] - mu) * rs * gamma[j] + beta[j];
  }
}

template <typename T>
void layer_norm_rows_backward(const T* x, const T* gamma, const T* mean, const T* rstd,
                              const T* dy, T* dx, T* dgamma, T* dbeta, int m, int n) {
  // dgamma/dbeta reduce over rows; kept serial so accumulation order is fixed.
  for (int i = 0; i < m; ++i) {
    const T* xrow = x + static_cast<std::size_t>(i) * n;
    const T* dyrow = dy + static_cast<std::size_t>(i) * n;
    const T mu = mean[i];
    const T rs = rstd[i];
    if (dgamma || dbeta) {
      for (int j = 0; j < n; ++j) {
        const T xhat = (xrow[j] - mu) * rs;
        if (dgamma) dgamma[j] += dyrow[j] * xhat;
        if (dbeta) dbeta[j] += dyrow[j];
      }
    }
  }
  if (!dx) return;
#pragma omp parallel for schedule(static) if (m > 4)
  for (int i = 0; i < m; ++i) {
    const T* xrow = x + static_cast<std::size_t>(i) * n;
    const T* dyrow = dy + static_cast<std::size_t>(i) * n;
    T* dxrow = dx + static_cast<std::size_t>(i) * n;
    const T mu = mean[i];
    const T rs = rstd[i];
    T sum_g = T(0), sum_gx = T(0);
    for (int j = 0; j < n; ++j) {
      const T g = dyrow[j] * gamma[j];
      const T xhat = (xrow[j] - mu) * rs;
      sum_g += g;
      sum_gx += g * xhat;
    }
    const T inv_n = T(1) / T(n);
    for (int j = 0; j < n; ++j) {
      const T g = dyrow[j] * gamma[j];
      const T xhat = (xrow[j] - mu) * rs;
      dxrow[j] += rs * (g - inv_n * sum_g - xhat * inv_n * sum_gx);
    }
  }
}

// Numerically stable row-wise softmax (max subtraction).
template <typename T>
void softmax_rows(const T* x, T* y, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 4)
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
    const T inv = T(1) / sum;
    for (int j = 0; j < n; ++j) yrow[j] *= inv;
  }
}

// dx += y .* (dy - sum(dy .* y)) per row, with y = softmax(x).
template <typename T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 4)
  for (int i = 0; i < m; ++i) {
    const T* yrow = y + static_cast<std::size_t>(i) * n;
    const T* dyrow = dy + static_cast<std::size_t>(i) * n;
    T* dxrow = dx + static_cast<std::size_t>(i) * n;
    T dot = T(0);
    for (int j = 0; j < n; ++j) dot += dyrow[j] * yrow[j];
    for (int j = 0; j < n; ++j) dxrow[j] += yrow[j] * (dyrow[j] - dot);
  }
}

// Row-wise log-softmax, stable in the log domain.
template <typename T>
void log_softmax_rows(const T* x, T* y, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 4)
  for (int i = 0; i < m; ++i) {
    const T* xrow = x + static_cast<std::size_t>(i) * n;
    T* yrow = y + static_cast<std::size_t>(i) * n;
    T mx = xrow[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, xrow[j]);
    T sum = T(0);
    for (int j = 0; j < n; ++j) sum += std::exp(xrow[j] - mx);
    const T lse = mx + std::log(sum);
    for (int j = 0; j < n; ++j) yrow[j] = xrow[j] - lse;
  }
}

}  // namespace pfgt::kernels

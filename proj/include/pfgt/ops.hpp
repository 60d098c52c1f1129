#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfgt/kernels.hpp"
#include "pfgt/tensor.hpp"

namespace pfgt::ops {

namespace detail {

template <typename T>
void require_2d(const TensorT<T>& t, const char* op) {
  if (t.shape.size() != 2) throw std::invalid_argument(std::string(op) + ": expected a 2-D tensor");
}

template <typename T>
void require_finite(const TensorT<T>& t, const char* op) {
  for (T v : *t.data) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(op) + ": non-finite input");
  }
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "x" : "") + std::to_string(s[i]);
  return r + "]";
}

}  // namespace detail

// C = A * B for A [m,k], B [k,n].
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  if (a.shape[1] != b.shape[0]) {
    throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                detail::shape_str(a.shape) + " * " + detail::shape_str(b.shape));
  }
  const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
  auto out = TensorT<T>::zeros({m, n});
  kernels::matmul(a.data->data(), b.data->data(), out.data->data(), m, k, n);
  return track(std::move(out), {a, b}, [m, k, n](const NodeT<T>& node) {
    const auto& pa = node.parents[0];
    const auto& pb = node.parents[1];
    if (pa.requires_grad) {
      kernels::matmul_nt(node.out_grad->data(), pb.data->data(), pa.grad->data(), m, n, k, true);
    }
    if (pb.requires_grad) {
      kernels::matmul_tn(pa.data->data(), node.out_grad->data(), pb.grad->data(), m, k, n, true);
    }
  });
}

// C = A * B^T for A [m,k], B [n,k]. Used for attention scores.
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require_2d(a, "matmul_nt");
  detail::require_2d(b, "matmul_nt");
  if (a.shape[1] != b.shape[1]) {
    throw std::invalid_argument("matmul_nt: inner dimensions disagree, " +
                                detail::shape_str(a.shape) + " * " + detail::shape_str(b.shape) +
                                "^T");
  }
  const int m = a.shape[0], k = a.shape[1], n = b.shape[0];
  auto out = TensorT<T>::zeros({m, n});
  kernels::matmul_nt(a.data->data(), b.data->data(), out.data->data(), m, k, n);
  return track(std::move(out), {a, b}, [m, k, n](const NodeT<T>& node) {
    const auto& pa = node.parents[0];
    const auto& pb = node.parents[1];
    if (pa.requires_grad) {
      kernels::matmul(node.out_grad->data(), pb.data->data(), pa.grad->data(), m, n, k, true);
    }
    if (pb.requires_grad) {
      kernels::matmul_tn(node.out_grad->data(), pa.data->data(), pb.grad->data(), m, n, k, true);
    }
  });
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape != b.shape) {
    throw std::invalid_argument("add: shape mismatch, " + detail::shape_str(a.shape) + " vs " +
                                detail::shape_str(b.shape));
  }
  auto out = TensorT<T>::zeros(a.shape);
  kernels::add(a.data->data(), b.data->data(), out.data->data(), out.numel());
  return track(std::move(out), {a, b}, [](const NodeT<T>& node) {
    for (int side = 0; side < 2; ++side) {
      const auto& p = node.parents[side];
      if (!p.requires_grad) continue;
      kernels::axpy(T(1), node.out_grad->data(), p.grad->data(), node.out_grad->size());
    }
  });
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape != b.shape) {
    throw std::invalid_argument("mul: shape mismatch, " + detail::shape_str(a.shape) + " vs " +
                                detail::shape_str(b.shape));
  }
  auto out = TensorT<T>::zeros(a.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
  return track(std::move(out), {a, b}, [](const NodeT<T>& node) {
    const auto& pa = node.parents[0];
    const auto& pb = node.parents[1];
    const std::size_t n = node.out_grad->size();
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) (*pa.grad)[i] += (*node.out_grad)[i] * (*pb.data)[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) (*pb.grad)[i] += (*node.out_grad)[i] * (*pa.data)[i];
    }
  });
}

// X [m,n] plus a length-n row vector broadcast over rows.
template <typename T>
TensorT<T> add_rowvec(const TensorT<T>& x, const TensorT<T>& b) {
  detail::require_2d(x, "add_rowvec");
  if (b.shape.size() != 1 || b.shape[0] != x.shape[1]) {
    throw std::invalid_argument("add_rowvec: bias must be a vector of length " +
                                std::to_string(x.shape[1]));
  }
  const int m = x.shape[0], n = x.shape[1];
  auto out = TensorT<T>::zeros(x.shape);
  kernels::add_rowvec(x.data->data(), b.data->data(), out.data->data(), m, n);
  return track(std::move(out), {x, b}, [m, n](const NodeT<T>& node) {
    const auto& px = node.parents[0];
    const auto& pb = node.parents[1];
    if (px.requires_grad) {
      kernels::axpy(T(1), node.out_grad->data(), px.grad->data(), node.out_grad->size());
    }
    if (pb.requires_grad) {
      for (int i = 0; i < m; ++i) {
        const T* g = node.out_grad->data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) (*pb.grad)[j] += g[j];
      }
    }
  });
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  auto out = TensorT<T>::zeros(a.shape);
  kernels::scale(a.data->data(), s, out.data->data(), out.numel());
  return track(std::move(out), {a}, [s](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (p.requires_grad) kernels::axpy(s, node.out_grad->data(), p.grad->data(), node.out_grad->size());
  });
}

// Concatenation along the sequence (row) axis.
template <typename T>
TensorT<T> concat_rows(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const int n = parts[0].cols();
  int m = 0;
  for (const auto& p : parts) {
    detail::require_2d(p, "concat_rows");
    if (p.shape[1] != n) throw std::invalid_argument("concat_rows: column counts disagree");
    m += p.shape[0];
  }
  auto out = TensorT<T>::zeros({m, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data->begin(), p.data->end(), out.data->begin() + off);
    off += p.numel();
  }
  return track(std::move(out), parts, [](const NodeT<T>& node) {
    std::size_t off2 = 0;
    for (const auto& p : node.parents) {
      if (p.requires_grad) {
        kernels::axpy(T(1), node.out_grad->data() + off2, p.grad->data(), p.numel());
      }
      off2 += p.numel();
    }
  });
}

template <typename T>
TensorT<T> slice_rows(const TensorT<T>& x, int r0, int nrows) {
  detail::require_2d(x, "slice_rows");
  if (r0 < 0 || nrows <= 0 || r0 + nrows > x.shape[0]) {
    throw std::invalid_argument("slice_rows: range out of bounds");
  }
  const int n = x.shape[1];
  auto out = TensorT<T>::zeros({nrows, n});
  const std::size_t off = static_cast<std::size_t>(r0) * n;
  std::copy(x.data->begin() + off, x.data->begin() + off + out.numel(), out.data->begin());
  return track(std::move(out), {x}, [off](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (p.requires_grad) {
      kernels::axpy(T(1), node.out_grad->data(), p.grad->data() + off, node.out_grad->size());
    }
  });
}

template <typename T>
TensorT<T> slice_cols(const TensorT<T>& x, int c0, int ncols) {
  detail::require_2d(x, "slice_cols");
  if (c0 < 0 || ncols <= 0 || c0 + ncols > x.shape[1]) {
    throw std::invalid_argument("slice_cols: range out of bounds");
  }
  const int m = x.shape[0], n = x.shape[1];
  auto out = TensorT<T>::zeros({m, ncols});
  for (int i = 0; i < m; ++i) {
    const T* src = x.data->data() + static_cast<std::size_t>(i) * n + c0;
    std::copy(src, src + ncols, out.data->data() + static_cast<std::size_t>(i) * ncols);
  }
  return track(std::move(out), {x}, [c0, m, n, ncols](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (!p.requires_grad) return;
    for (int i = 0; i < m; ++i) {
      const T* g = node.out_grad->data() + static_cast<std::size_t>(i) * ncols;
      T* dst = p.grad->data() + static_cast<std::size_t>(i) * n + c0;
      for (int j = 0; j < ncols; ++j) dst[j] += g[j];
    }
  });
}

template <typename T>
TensorT<T> concat_cols(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int m = parts[0].rows();
  int n = 0;
  for (const auto& p : parts) {
    detail::require_2d(p, "concat_cols");
    if (p.shape[0] != m) throw std::invalid_argument("concat_cols: row counts disagree");
    n += p.shape[1];
  }
  auto out = TensorT<T>::zeros({m, n});
  int c0 = 0;
  for (const auto& p : parts) {
    const int pc = p.shape[1];
    for (int i = 0; i < m; ++i) {
      std::copy(p.data->data() + static_cast<std::size_t>(i) * pc,
                p.data->data() + static_cast<std::size_t>(i) * pc + pc,
                out.data->data() + static_cast<std::size_t>(i) * n + c0);
    }
    c0 += pc;
  }
  return track(std::move(out), parts, [m, n](const NodeT<T>& node) {
    int c0b = 0;
    for (const auto& p : node.parents) {
      const int pc = p.shape[1];
      if (p.requires_grad) {
        for (int i = 0; i < m; ++i) {
          const T* g = node.out_grad->data() + static_cast<std::size_t>(i) * n + c0b;
          T* dst = p.grad->data() + static_cast<std::size_t>(i) * pc;
          for (int j = 0; j < pc; ++j) dst[j] += g[j];
        }
      }
      c0b += pc;
    }
  });
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, std::vector<int> shape) {
  if (TensorT<T>::numel_of(shape) != x.numel()) {
    throw std::invalid_argument("reshape: element count mismatch");
  }
  auto out = TensorT<T>::zeros(std::move(shape));
  std::copy(x.data->begin(), x.data->end(), out.data->begin());
  return track(std::move(out), {x}, [](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (p.requires_grad) {
      kernels::axpy(T(1), node.out_grad->data(), p.grad->data(), node.out_grad->size());
    }
  });
}

// Row-wise layer normalization with affine parameters gamma, beta.
template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      T eps = T(1e-5)) {
  detail::require_2d(x, "layer_norm");
  const int m = x.shape[0], n = x.shape[1];
  if (gamma.shape.size() != 1 || gamma.shape[0] != n || beta.shape.size() != 1 ||
      beta.shape[0] != n) {
    throw std::invalid_argument("layer_norm: affine parameters must be vectors of length " +
                                std::to_string(n));
  }
  auto out = TensorT<T>::zeros(x.shape);
  auto mean = std::make_shared<std::vector<T>>(static_cast<std::size_t>(m));
  auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(m));
  kernels::layer_norm_rows(x.data->data(), gamma.data->data(), beta.data->data(),
                           out.data->data(), mean->data(), rstd->data(), m, n, eps);
  return track(std::move(out), {x, gamma, beta}, [m, n, mean, rstd](const NodeT<T>& node) {
    const auto& px = node.parents[0];
    const auto& pg = node.parents[1];
    const auto& pb = node.parents[2];
    kernels::layer_norm_rows_backward(px.data->data(), pg.data->data(), mean->data(),
                                      rstd->data(), node.out_grad->data(),
                                      px.requires_grad ? px.grad->data() : nullptr,
                                      pg.requires_grad ? pg.grad->data() : nullptr,
                                      pb.requires_grad ? pb.grad->data() : nullptr, m, n);
  });
}

template <typename T>
TensorT<T> gelu(const TensorT<T>& x) {
  auto out = TensorT<T>::zeros(x.shape);
  kernels::gelu(x.data->data(), out.data->data(), x.numel());
  return track(std::move(out), {x}, [](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (p.requires_grad) {
      kernels::gelu_backward(p.data->data(), node.out_grad->data(), p.grad->data(),
                             node.out_grad->size());
    }
  });
}

// Softmax over the last axis of a 1-D or 2-D tensor. Rejects non-finite input.
template <typename T>
TensorT<T> softmax(const TensorT<T>& x) {
  if (x.shape.empty() || x.shape.size() > 2) {
    throw std::invalid_argument("softmax: expected a 1-D or 2-D tensor");
  }
  detail::require_finite(x, "softmax");
  const int n = x.shape.back();
  const int m = static_cast<int>(x.numel()) / n;
  auto out = TensorT<T>::zeros(x.shape);
  kernels::softmax_rows(x.data->data(), out.data->data(), m, n);
  auto y = out.data;
  return track(std::move(out), {x}, [m, n, y](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (p.requires_grad) {
      kernels::softmax_rows_backward(y->data(), node.out_grad->data(), p.grad->data(), m, n);
    }
  });
}

template <typename T>
TensorT<T> mean_all(const TensorT<T>& x) {
  const std::size_t n = x.numel();
  T acc = T(0);
  for (T v : *x.data) acc += v;
  auto out = TensorT<T>::scalar(acc / T(n));
  return track(std::move(out), {x}, [n](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (p.requires_grad) {
      const T g = (*node.out_grad)[0] / T(n);
      for (std::size_t i = 0; i < n; ++i) (*p.grad)[i] += g;
    }
  });
}

// -log softmax(logits)[label] for a 1-D logit vector.
template <typename T>
TensorT<T> cross_entropy(const TensorT<T>& logits, int label) {
  if (logits.shape.size() != 1) throw std::invalid_argument("cross_entropy: expected 1-D logits");
  const int k = logits.shape[0];
  if (label < 0 || label >= k) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                " out of range [0," + std::to_string(k) + ")");
  }
  detail::require_finite(logits, "cross_entropy");
  auto lsm = std::make_shared<std::vector<T>>(static_cast<std::size_t>(k));
  kernels::log_softmax_rows(logits.data->data(), lsm->data(), 1, k);
  auto out = TensorT<T>::scalar(-(*lsm)[static_cast<std::size_t>(label)]);
  return track(std::move(out), {logits}, [k, label, lsm](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (!p.requires_grad) return;
    const T g = (*node.out_grad)[0];
    for (int j = 0; j < k; ++j) {
      const T pj = std::exp((*lsm)[static_cast<std::size_t>(j)]);
      (*p.grad)[static_cast<std::size_t>(j)] += g * (pj - (j == label ? T(1) : T(0)));
    }
  });
}

// D_KL(softmax(logits) || uniform) over the full class dimension. Computed
// from log-probabilities, so a hard zero probability never reaches log().
template <typename T>
TensorT<T> kl_to_uniform(const TensorT<T>& logits) {
  if (logits.shape.size() != 1) throw std::invalid_argument("kl_to_uniform: expected 1-D logits");
  const int k = logits.shape[0];
  if (k < 2) throw std::invalid_argument("kl_to_uniform: needs at least 2 classes");
  detail::require_finite(logits, "kl_to_uniform");
  auto lsm = std::make_shared<std::vector<T>>(static_cast<std::size_t>(k));
  kernels::log_softmax_rows(logits.data->data(), lsm->data(), 1, k);
  const T logk = std::log(T(k));
  T kl = T(0);
  for (int j = 0; j < k; ++j) {
    const T lp = (*lsm)[static_cast<std::size_t>(j)];
    kl += std::exp(lp) * (lp + logk);
  }
  if (kl < T(0)) kl = T(0);  // guards fp round-off near the uniform point
  auto out = TensorT<T>::scalar(kl);
  return track(std::move(out), {logits}, [k, logk, kl, lsm](const NodeT<T>& node) {
    const auto& p = node.parents[0];
    if (!p.requires_grad) return;
    const T g = (*node.out_grad)[0];
    for (int j = 0; j < k; ++j) {
      const T lp = (*lsm)[static_cast<std::size_t>(j)];
      (*p.grad)[static_cast<std::size_t>(j)] += g * std::exp(lp) * (lp + logk - kl);
    }
  });
}

}  // namespace pfgt::ops

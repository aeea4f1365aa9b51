#pragma once

#include <vector>

// Small row-major GEMM kernels backing conv2d and linear. Accumulation order
// is fixed (k ascending for every output element) so results are bit-stable
// across runs.

namespace btnet {

// C(M x N) += A(M x K) * B(K x N)
template <typename T>
inline void gemm_nn_acc(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + static_cast<long>(i) * n;
    const T* ai = a + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C(M x N) += A(M x K) * B(N x K)^T
// Large shapes transpose B into scratch first; each C element still receives
// its k terms in ascending order, so both paths produce identical sums.
template <typename T>
inline void gemm_nt_acc(int m, int n, int k, const T* a, const T* b, T* c) {
  if (static_cast<long>(n) * k < 4096) {
    for (int i = 0; i < m; ++i) {
      const T* ai = a + static_cast<long>(i) * k;
      T* ci = c + static_cast<long>(i) * n;
      for (int j = 0; j < n; ++j) {
        const T* bj = b + static_cast<long>(j) * k;
        T acc = 0;
        for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] += acc;
      }
    }
    return;
  }
  thread_local std::vector<T> bt;
  bt.resize(static_cast<std::size_t>(k) * n);
  constexpr int TB = 64;
  for (int j0 = 0; j0 < n; j0 += TB) {
    const int j1 = j0 + TB < n ? j0 + TB : n;
    for (int p0 = 0; p0 < k; p0 += TB) {
      const int p1 = p0 + TB < k ? p0 + TB : k;
      for (int j = j0; j < j1; ++j)
        for (int p = p0; p < p1; ++p)
          bt[static_cast<std::size_t>(p) * n + j] = b[static_cast<std::size_t>(j) * k + p];
    }
  }
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<long>(i) * k;
    T* ci = c + static_cast<long>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = bt.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C(M x N) += A(K x M)^T * B(K x N)
template <typename T>
inline void gemm_tn_acc(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int p = 0; p < k; ++p) {
    const T* ap = a + static_cast<long>(p) * m;
    const T* bp = b + static_cast<long>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = ap[i];
      T* ci = c + static_cast<long>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace btnet

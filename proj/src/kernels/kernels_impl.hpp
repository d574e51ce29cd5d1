#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>

namespace latpred::kernels {

namespace scalar {

template <typename T>
void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, n * sizeof(T));
  }
  if (!trans_a) {
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = c + i * ldc;
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = a[i * lda + p];
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else {
    for (std::size_t p = 0; p < k; ++p) {
      const T* arow = a + p * lda;
      const T* brow = b + p * ldb;
      for (std::size_t i = 0; i < m; ++i) {
        const T api = arow[i];
        T* crow = c + i * ldc;
        for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    }
  }
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void lstm_cell_forward(std::size_t rows, std::size_t hidden, T* gates, const T* c_prev, T* c,
                       T* tanh_c, T* h, std::size_t ldh) {
  const std::size_t H = hidden;
  for (std::size_t r = 0; r < rows; ++r) {
    T* g = gates + r * 4 * H;
    for (std::size_t j = 0; j < H; ++j) {
      const T ig = sigmoid(g[j]);
      const T fg = sigmoid(g[H + j]);
      const T gg = std::tanh(g[2 * H + j]);
      const T og = sigmoid(g[3 * H + j]);
      g[j] = ig;
      g[H + j] = fg;
      g[2 * H + j] = gg;
      g[3 * H + j] = og;
      const T cp = c_prev ? c_prev[r * H + j] : T(0);
      const T cn = fg * cp + ig * gg;
      const T tc = std::tanh(cn);
      c[r * H + j] = cn;
      tanh_c[r * H + j] = tc;
      h[r * ldh + j] = og * tc;
    }
  }
}

template <typename T>
void lstm_cell_backward(std::size_t rows, std::size_t hidden, const T* gates, const T* c_prev,
                        const T* tanh_c, const T* dh, T* dc, T* dgates) {
  const std::size_t H = hidden;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* g = gates + r * 4 * H;
    T* dg = dgates + r * 4 * H;
    for (std::size_t j = 0; j < H; ++j) {
      const T ig = g[j], fg = g[H + j], gg = g[2 * H + j], og = g[3 * H + j];
      const T tc = tanh_c[r * H + j];
      const T dhv = dh[r * H + j];
      const T cp = c_prev ? c_prev[r * H + j] : T(0);
      const T dct = dc[r * H + j] + dhv * og * (T(1) - tc * tc);
      dg[j] = dct * gg * ig * (T(1) - ig);
      dg[H + j] = dct * cp * fg * (T(1) - fg);
      dg[2 * H + j] = dct * ig * (T(1) - gg * gg);
      dg[3 * H + j] = dhv * tc * og * (T(1) - og);
      dc[r * H + j] = dct * fg;
    }
  }
}

}  // namespace scalar

namespace avx2 {

void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const float* a,
          std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc,
          bool accumulate);
void lstm_cell_forward(std::size_t rows, std::size_t hidden, float* gates, const float* c_prev,
                       float* c, float* tanh_c, float* h, std::size_t ldh);
void lstm_cell_backward(std::size_t rows, std::size_t hidden, const float* gates,
                        const float* c_prev, const float* tanh_c, const float* dh, float* dc,
                        float* dgates);

}  // namespace avx2

}  // namespace latpred::kernels

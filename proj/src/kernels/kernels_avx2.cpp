// AVX2/FMA kernels. This file is compiled with -mavx2 -mfma and only entered
// after a runtime CPU check.

#include "kernels_impl.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cstdint>

namespace latpred::kernels::avx2 {
namespace {

constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 16;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 96;

inline __m256i tail_mask(std::size_t count) {
  alignas(32) static const std::int32_t kTable[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                      0,  0,  0,  0,  0,  0,  0,  0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kTable + 8 - count));
}

// C[rows, 16] += op(A)[rows, kc] * B[kc, 16]. When kFull is false only `cols`
// (< 16) columns are touched.
template <std::size_t kRows, bool kTransA, bool kFull>
void micro_kernel(std::size_t kc, const float* a, std::size_t lda, const float* b,
                  std::size_t ldb, float* c, std::size_t ldc, std::size_t cols) {
  __m256 acc0[kRows];
  __m256 acc1[kRows];
  __m256i m0{}, m1{};
  if constexpr (!kFull) {
    m0 = tail_mask(std::min<std::size_t>(cols, 8));
    m1 = tail_mask(cols > 8 ? cols - 8 : 0);
  }
  for (std::size_t r = 0; r < kRows; ++r) {
    acc0[r] = _mm256_setzero_ps();
    acc1[r] = _mm256_setzero_ps();
  }
  for (std::size_t p = 0; p < kc; ++p) {
    const float* bp = b + p * ldb;
    __m256 b0, b1;
    if constexpr (kFull) {
      b0 = _mm256_loadu_ps(bp);
      b1 = _mm256_loadu_ps(bp + 8);
    } else {
      b0 = _mm256_maskload_ps(bp, m0);
      b1 = _mm256_maskload_ps(bp + 8, m1);
    }
    for (std::size_t r = 0; r < kRows; ++r) {
      const float av = kTransA ? a[p * lda + r] : a[r * lda + p];
      const __m256 ab = _mm256_set1_ps(av);
      acc0[r] = _mm256_fmadd_ps(ab, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(ab, b1, acc1[r]);
    }
  }
  for (std::size_t r = 0; r < kRows; ++r) {
    float* cr = c + r * ldc;
    if constexpr (kFull) {
      _mm256_storeu_ps(cr, _mm256_add_ps(_mm256_loadu_ps(cr), acc0[r]));
      _mm256_storeu_ps(cr + 8, _mm256_add_ps(_mm256_loadu_ps(cr + 8), acc1[r]));
    } else {
      _mm256_maskstore_ps(cr, m0, _mm256_add_ps(_mm256_maskload_ps(cr, m0), acc0[r]));
      _mm256_maskstore_ps(cr + 8, m1, _mm256_add_ps(_mm256_maskload_ps(cr + 8, m1), acc1[r]));
    }
  }
}

template <bool kTransA, bool kFull>
void row_panel(std::size_t rows, std::size_t kc, const float* a, std::size_t lda, const float* b,
               std::size_t ldb, float* c, std::size_t ldc, std::size_t cols) {
  switch (rows) {
    case 6: micro_kernel<6, kTransA, kFull>(kc, a, lda, b, ldb, c, ldc, cols); break;
    case 5: micro_kernel<5, kTransA, kFull>(kc, a, lda, b, ldb, c, ldc, cols); break;
    case 4: micro_kernel<4, kTransA, kFull>(kc, a, lda, b, ldb, c, ldc, cols); break;
    case 3: micro_kernel<3, kTransA, kFull>(kc, a, lda, b, ldb, c, ldc, cols); break;
    case 2: micro_kernel<2, kTransA, kFull>(kc, a, lda, b, ldb, c, ldc, cols); break;
    case 1: micro_kernel<1, kTransA, kFull>(kc, a, lda, b, ldb, c, ldc, cols); break;
    default: break;
  }
}

template <bool kTransA>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
    const std::size_t kc = std::min(kKc, k - p0);
    for (std::size_t i0 = 0; i0 < m; i0 += kMc) {
      const std::size_t mc = std::min(kMc, m - i0);
      for (std::size_t j0 = 0; j0 < n; j0 += kNr) {
        const std::size_t cols = std::min(kNr, n - j0);
        const float* bp = b + p0 * ldb + j0;
        for (std::size_t i = i0; i < i0 + mc; i += kMr) {
          const std::size_t rows = std::min(kMr, i0 + mc - i);
          const float* ap = kTransA ? a + p0 * lda + i : a + i * lda + p0;
          float* cp = c + i * ldc + j0;
          if (cols == kNr) {
            row_panel<kTransA, true>(rows, kc, ap, lda, bp, ldb, cp, ldc, cols);
          } else {
            row_panel<kTransA, false>(rows, kc, ap, lda, bp, ldb, cp, ldc, cols);
          }
        }
      }
    }
  }
}

// exp(x) via range reduction to [-ln2/2, ln2/2] and a degree-5 polynomial
// (Cephes expf coefficients). Relative error is a few ulp.
inline __m256 exp_ps(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-87.3365447504f);
  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, _mm256_mul_ps(x, x), _mm256_add_ps(x, _mm256_set1_ps(1.0f)));
  __m256i n = _mm256_cvttps_epi32(fx);
  n = _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(127)), 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

inline __m256 sigmoid_ps(__m256 x) {
  const __m256 one = _mm256_set1_ps(1.0f);
  return _mm256_div_ps(one, _mm256_add_ps(one, exp_ps(_mm256_sub_ps(_mm256_setzero_ps(), x))));
}

// tanh(x) = 2 * sigmoid(2x) - 1
inline __m256 tanh_ps(__m256 x) {
  const __m256 two = _mm256_set1_ps(2.0f);
  return _mm256_fmsub_ps(two, sigmoid_ps(_mm256_mul_ps(two, x)), _mm256_set1_ps(1.0f));
}

}  // namespace

void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const float* a,
          std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc,
          bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, n * sizeof(float));
  }
  if (m == 0 || n == 0 || k == 0) return;
  if (trans_a) {
    gemm_impl<true>(m, n, k, a, lda, b, ldb, c, ldc);
  } else {
    gemm_impl<false>(m, n, k, a, lda, b, ldb, c, ldc);
  }
}

void lstm_cell_forward(std::size_t rows, std::size_t hidden, float* gates, const float* c_prev,
                       float* c, float* tanh_c, float* h, std::size_t ldh) {
  const std::size_t H = hidden;
  const std::size_t vec_end = H - H % 8;
  for (std::size_t r = 0; r < rows; ++r) {
    float* g = gates + r * 4 * H;
    std::size_t j = 0;
    for (; j < vec_end; j += 8) {
      const __m256 ig = sigmoid_ps(_mm256_loadu_ps(g + j));
      const __m256 fg = sigmoid_ps(_mm256_loadu_ps(g + H + j));
      const __m256 gg = tanh_ps(_mm256_loadu_ps(g + 2 * H + j));
      const __m256 og = sigmoid_ps(_mm256_loadu_ps(g + 3 * H + j));
      _mm256_storeu_ps(g + j, ig);
      _mm256_storeu_ps(g + H + j, fg);
      _mm256_storeu_ps(g + 2 * H + j, gg);
      _mm256_storeu_ps(g + 3 * H + j, og);
      const __m256 cp = c_prev ? _mm256_loadu_ps(c_prev + r * H + j) : _mm256_setzero_ps();
      const __m256 cn = _mm256_fmadd_ps(fg, cp, _mm256_mul_ps(ig, gg));
      const __m256 tc = tanh_ps(cn);
      _mm256_storeu_ps(c + r * H + j, cn);
      _mm256_storeu_ps(tanh_c + r * H + j, tc);
      _mm256_storeu_ps(h + r * ldh + j, _mm256_mul_ps(og, tc));
    }
    // Scalar tail for hidden sizes that are not a multiple of 8.
    for (; j < H; ++j) {
      const float ig = scalar::sigmoid(g[j]);
      const float fg = scalar::sigmoid(g[H + j]);
      const float gg = std::tanh(g[2 * H + j]);
      const float og = scalar::sigmoid(g[3 * H + j]);
      g[j] = ig;
      g[H + j] = fg;
      g[2 * H + j] = gg;
      g[3 * H + j] = og;
      const float cp = c_prev ? c_prev[r * H + j] : 0.0f;
      const float cn = fg * cp + ig * gg;
      const float tc = std::tanh(cn);
      c[r * H + j] = cn;
      tanh_c[r * H + j] = tc;
      h[r * ldh + j] = og * tc;
    }
  }
}

void lstm_cell_backward(std::size_t rows, std::size_t hidden, const float* gates,
                        const float* c_prev, const float* tanh_c, const float* dh, float* dc,
                        float* dgates) {
  const std::size_t H = hidden;
  const std::size_t vec_end = H - H % 8;
  const __m256 one = _mm256_set1_ps(1.0f);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* g = gates + r * 4 * H;
    float* dg = dgates + r * 4 * H;
    std::size_t j = 0;
    for (; j < vec_end; j += 8) {
      const __m256 ig = _mm256_loadu_ps(g + j);
      const __m256 fg = _mm256_loadu_ps(g + H + j);
      const __m256 gg = _mm256_loadu_ps(g + 2 * H + j);
      const __m256 og = _mm256_loadu_ps(g + 3 * H + j);
      const __m256 tc = _mm256_loadu_ps(tanh_c + r * H + j);
      const __m256 dhv = _mm256_loadu_ps(dh + r * H + j);
      const __m256 cp = c_prev ? _mm256_loadu_ps(c_prev + r * H + j) : _mm256_setzero_ps();
      const __m256 one_m_tc2 = _mm256_fnmadd_ps(tc, tc, one);
      const __m256 dct =
          _mm256_fmadd_ps(_mm256_mul_ps(dhv, og), one_m_tc2, _mm256_loadu_ps(dc + r * H + j));
      const __m256 di = _mm256_mul_ps(_mm256_mul_ps(dct, gg),
                                      _mm256_mul_ps(ig, _mm256_sub_ps(one, ig)));
      const __m256 df = _mm256_mul_ps(_mm256_mul_ps(dct, cp),
                                      _mm256_mul_ps(fg, _mm256_sub_ps(one, fg)));
      const __m256 dgg = _mm256_mul_ps(_mm256_mul_ps(dct, ig), _mm256_fnmadd_ps(gg, gg, one));
      const __m256 dog = _mm256_mul_ps(_mm256_mul_ps(dhv, tc),
                                       _mm256_mul_ps(og, _mm256_sub_ps(one, og)));
      _mm256_storeu_ps(dg + j, di);
      _mm256_storeu_ps(dg + H + j, df);
      _mm256_storeu_ps(dg + 2 * H + j, dgg);
      _mm256_storeu_ps(dg + 3 * H + j, dog);
      _mm256_storeu_ps(dc + r * H + j, _mm256_mul_ps(dct, fg));
    }
    for (; j < H; ++j) {
      const float ig = g[j], fg = g[H + j], gg = g[2 * H + j], og = g[3 * H + j];
      const float tc = tanh_c[r * H + j];
      const float dhv = dh[r * H + j];
      const float cp = c_prev ? c_prev[r * H + j] : 0.0f;
      const float dct = dc[r * H + j] + dhv * og * (1.0f - tc * tc);
      dg[j] = dct * gg * ig * (1.0f - ig);
      dg[H + j] = dct * cp * fg * (1.0f - fg);
      dg[2 * H + j] = dct * ig * (1.0f - gg * gg);
      dg[3 * H + j] = dhv * tc * og * (1.0f - og);
      dc[r * H + j] = dct * fg;
    }
  }
}

}  // namespace latpred::kernels::avx2

#else

namespace latpred::kernels::avx2 {

void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const float* a,
          std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc,
          bool accumulate) {
  scalar::gemm(trans_a, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
void lstm_cell_forward(std::size_t rows, std::size_t hidden, float* gates, const float* c_prev,
                       float* c, float* tanh_c, float* h, std::size_t ldh) {
  scalar::lstm_cell_forward(rows, hidden, gates, c_prev, c, tanh_c, h, ldh);
}
void lstm_cell_backward(std::size_t rows, std::size_t hidden, const float* gates,
                        const float* c_prev, const float* tanh_c, const float* dh, float* dc,
                        float* dgates) {
  scalar::lstm_cell_backward(rows, hidden, gates, c_prev, tanh_c, dh, dc, dgates);
}

}  // namespace latpred::kernels::avx2

#endif

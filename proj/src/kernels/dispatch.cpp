#include <atomic>

#include "kernels_impl.hpp"
#include "latpred/kernels.hpp"

namespace latpred::kernels {
namespace {

Backend detect() { return avx2_supported() ? Backend::Avx2 : Backend::Scalar; }

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

std::string_view backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

Backend set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported()) b = Backend::Scalar;
  current().store(b, std::memory_order_relaxed);
  return b;
}

void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const float* a,
          std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc,
          bool accumulate) {
  if (active_backend() == Backend::Avx2) {
    avx2::gemm(trans_a, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  } else {
    scalar::gemm(trans_a, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  }
}

void lstm_cell_forward(std::size_t rows, std::size_t hidden, float* gates, const float* c_prev,
                       float* c, float* tanh_c, float* h, std::size_t ldh) {
  if (active_backend() == Backend::Avx2) {
    avx2::lstm_cell_forward(rows, hidden, gates, c_prev, c, tanh_c, h, ldh);
  } else {
    scalar::lstm_cell_forward(rows, hidden, gates, c_prev, c, tanh_c, h, ldh);
  }
}

void lstm_cell_backward(std::size_t rows, std::size_t hidden, const float* gates,
                        const float* c_prev, const float* tanh_c, const float* dh, float* dc,
                        float* dgates) {
  if (active_backend() == Backend::Avx2) {
    avx2::lstm_cell_backward(rows, hidden, gates, c_prev, tanh_c, dh, dc, dgates);
  } else {
    scalar::lstm_cell_backward(rows, hidden, gates, c_prev, tanh_c, dh, dc, dgates);
  }
}

}  // namespace latpred::kernels

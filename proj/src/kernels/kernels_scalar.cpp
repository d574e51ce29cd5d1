#include "kernels_impl.hpp"
#include "latpred/kernels.hpp"

namespace latpred::kernels {

void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
          bool accumulate) {
  scalar::gemm(trans_a, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void lstm_cell_forward(std::size_t rows, std::size_t hidden, double* gates, const double* c_prev,
                       double* c, double* tanh_c, double* h, std::size_t ldh) {
  scalar::lstm_cell_forward(rows, hidden, gates, c_prev, c, tanh_c, h, ldh);
}

void lstm_cell_backward(std::size_t rows, std::size_t hidden, const double* gates,
                        const double* c_prev, const double* tanh_c, const double* dh, double* dc,
                        double* dgates) {
  scalar::lstm_cell_backward(rows, hidden, gates, c_prev, tanh_c, dh, dc, dgates);
}

}  // namespace latpred::kernels

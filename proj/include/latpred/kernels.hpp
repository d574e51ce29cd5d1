#pragma once

// Dense arithmetic used by the LSTM. Every float entry point has a scalar
// reference and an AVX2/FMA variant chosen at runtime; double always runs the
// scalar reference.

#include <cstddef>
#include <string_view>

namespace latpred::kernels {

enum class Backend { Scalar, Avx2 };

bool avx2_supported();
Backend active_backend();
std::string_view backend_name(Backend b);
/// Selects the backend for subsequent float calls. Requesting Avx2 on a CPU
/// without it falls back to Scalar. Returns the backend actually chosen.
Backend set_backend(Backend b);

/// C[m,n] = beta * C + op(A) * B with beta in {0, 1}.
/// op(A) is A (stored [m,k], leading dim lda) or, when trans_a, A^T with A
/// stored [k,m]. B is stored [k,n] with leading dim ldb.
void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const float* a,
          std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc,
          bool accumulate);
void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
          bool accumulate);

/// One LSTM step for `rows` independent rows.
/// gates: [rows, 4H] pre-activations in (i, f, g, o) order, overwritten with
/// the activated values. c_prev may be null (zero state). h is written with
/// row stride ldh so directions can share an output buffer.
void lstm_cell_forward(std::size_t rows, std::size_t hidden, float* gates, const float* c_prev,
                       float* c, float* tanh_c, float* h, std::size_t ldh);
void lstm_cell_forward(std::size_t rows, std::size_t hidden, double* gates, const double* c_prev,
                       double* c, double* tanh_c, double* h, std::size_t ldh);

/// Reverse of lstm_cell_forward. dh is the total gradient at h_t; dc holds the
/// gradient at c_t on entry and at c_{t-1} on exit. Writes pre-activation gate
/// gradients to dgates [rows, 4H].
void lstm_cell_backward(std::size_t rows, std::size_t hidden, const float* gates,
                        const float* c_prev, const float* tanh_c, const float* dh, float* dc,
                        float* dgates);
void lstm_cell_backward(std::size_t rows, std::size_t hidden, const double* gates,
                        const double* c_prev, const double* tanh_c, const double* dh, double* dc,
                        double* dgates);

}  // namespace latpred::kernels

#pragma once

#include <cstddef>

// Dense linear-algebra kernels used by the network. Every kernel exists in a
// serial reference version and an OpenMP version. The parallel versions split
// work only across independent output elements, so for any thread count they
// produce bit-identical results to the serial reference; the parity is
// enforced by tests/test_kernels.cpp and timed by bench/kernels_bench.cpp.
//
// The unqualified entry points dispatch to the OpenMP version when the kernel
// is large enough to amortize the fork/join cost, and to the serial version
// otherwise. The threshold depends only on problem size, never on data, so
// dispatch itself is deterministic.
namespace jg::kernels {

// Globally disable the OpenMP paths (used by tests and the benchmark).
void set_parallel_enabled(bool enabled);
bool parallel_enabled();

// Work (in flops or touched elements) below which forking threads is a loss.
inline constexpr std::size_t kParallelThreshold = 32768;

namespace serial {

// y[r] = sum_c W[r,c] * x[c] + b[r]; W is row-major rows x cols.
void linear(const double* W, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);

// out[c] = sum_r W[r,c] * d[r]  (W^T * d).
void linear_input_grad(const double* W, const double* d, double* out,
                       std::size_t rows, std::size_t cols);

// G[r,c] += d[r] * x[c]; gb[r] += d[r].
void linear_param_grad(const double* d, const double* x, double* G, double* gb,
                       std::size_t rows, std::size_t cols);

// Z[s,r] = sum_c X[s,c] * W[r,c] + b[r]; X is batch x cols, Z batch x rows.
void linear_batch(const double* W, const double* X, const double* b, double* Z,
                  std::size_t batch, std::size_t rows, std::size_t cols);

// dX[s,c] = sum_r dZ[s,r] * W[r,c].
void linear_batch_input_grad(const double* W, const double* dZ, double* dX,
                             std::size_t batch, std::size_t rows, std::size_t cols);

// G[r,c] += sum_s dZ[s,r] * X[s,c]; gb[r] += sum_s dZ[s,r].
void linear_batch_param_grad(const double* dZ, const double* X, double* G, double* gb,
                             std::size_t batch, std::size_t rows, std::size_t cols);

// Bias-corrected Adam step on one flat parameter tensor.
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double alpha, double beta1, double beta2, double eps,
                 double beta1_pow, double beta2_pow);

}  // namespace serial

namespace omp {

void linear(const double* W, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);
void linear_input_grad(const double* W, const double* d, double* out,
                       std::size_t rows, std::size_t cols);
void linear_param_grad(const double* d, const double* x, double* G, double* gb,
                       std::size_t rows, std::size_t cols);
void linear_batch(const double* W, const double* X, const double* b, double* Z,
                  std::size_t batch, std::size_t rows, std::size_t cols);
void linear_batch_input_grad(const double* W, const double* dZ, double* dX,
                             std::size_t batch, std::size_t rows, std::size_t cols);
void linear_batch_param_grad(const double* dZ, const double* X, double* G, double* gb,
                             std::size_t batch, std::size_t rows, std::size_t cols);
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double alpha, double beta1, double beta2, double eps,
                 double beta1_pow, double beta2_pow);

}  // namespace omp

// Dispatching entry points.
void linear(const double* W, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);
void linear_input_grad(const double* W, const double* d, double* out,
                       std::size_t rows, std::size_t cols);
void linear_param_grad(const double* d, const double* x, double* G, double* gb,
                       std::size_t rows, std::size_t cols);
void linear_batch(const double* W, const double* X, const double* b, double* Z,
                  std::size_t batch, std::size_t rows, std::size_t cols);
void linear_batch_input_grad(const double* W, const double* dZ, double* dX,
                             std::size_t batch, std::size_t rows, std::size_t cols);
void linear_batch_param_grad(const double* dZ, const double* X, double* G, double* gb,
                             std::size_t batch, std::size_t rows, std::size_t cols);
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double alpha, double beta1, double beta2, double eps,
                 double beta1_pow, double beta2_pow);

}  // namespace jg::kernels

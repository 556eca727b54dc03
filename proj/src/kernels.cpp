#include "jellygym/kernels.hpp"

#include <atomic>
#include <cmath>

namespace jg::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel_enabled(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

// ---------------------------------------------------------------------------
// Serial reference implementations. These define the exact floating-point
// result; the OpenMP versions must match them bit for bit.
// ---------------------------------------------------------------------------

namespace serial {

void linear(const double* W, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = W + r * cols;
        double acc = b ? b[r] : 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

void linear_input_grad(const double* W, const double* d, double* out,
                       std::size_t rows, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) acc += W[r * cols + c] * d[r];
        out[c] = acc;
    }
}

void linear_param_grad(const double* d, const double* x, double* G, double* gb,
                       std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double dr = d[r];
        double* gr = G + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gr[c] += dr * x[c];
        gb[r] += dr;
    }
}

void linear_batch(const double* W, const double* X, const double* b, double* Z,
                  std::size_t batch, std::size_t rows, std::size_t cols) {
    for (std::size_t s = 0; s < batch; ++s) {
        const double* xs = X + s * cols;
        double* zs = Z + s * rows;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* wr = W + r * cols;
            double acc = b ? b[r] : 0.0;
            for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xs[c];
            zs[r] = acc;
        }
    }
}

void linear_batch_input_grad(const double* W, const double* dZ, double* dX,
                             std::size_t batch, std::size_t rows, std::size_t cols) {
    for (std::size_t s = 0; s < batch; ++s) {
        const double* ds = dZ + s * rows;
        double* xs = dX + s * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) acc += W[r * cols + c] * ds[r];
            xs[c] = acc;
        }
    }
}

void linear_batch_param_grad(const double* dZ, const double* X, double* G, double* gb,
                             std::size_t batch, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* gr = G + r * cols;
        double accb = 0.0;
        for (std::size_t s = 0; s < batch; ++s) {
            double dsr = dZ[s * rows + r];
            const double* xs = X + s * cols;
            for (std::size_t c = 0; c < cols; ++c) gr[c] += dsr * xs[c];
            accb += dsr;
        }
        gb[r] += accb;
    }
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double alpha, double beta1, double beta2, double eps,
                 double beta1_pow, double beta2_pow) {
    const double bc1 = 1.0 - beta1_pow;
    const double bc2 = 1.0 - beta2_pow;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        p[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP implementations. Each output element is owned by exactly one thread
// and its inner accumulation runs in the same order as the serial reference,
// so results do not depend on the thread count.
// ---------------------------------------------------------------------------

namespace omp {

void linear(const double* W, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = W + r * cols;
        double acc = b ? b[r] : 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

void linear_input_grad(const double* W, const double* d, double* out,
                       std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) acc += W[r * cols + c] * d[r];
        out[c] = acc;
    }
}

void linear_param_grad(const double* d, const double* x, double* G, double* gb,
                       std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < rows; ++r) {
        double dr = d[r];
        double* gr = G + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gr[c] += dr * x[c];
        gb[r] += dr;
    }
}

void linear_batch(const double* W, const double* X, const double* b, double* Z,
                  std::size_t batch, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) collapse(2)
    for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xs = X + s * cols;
            const double* wr = W + r * cols;
            double acc = b ? b[r] : 0.0;
            for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xs[c];
            Z[s * rows + r] = acc;
        }
    }
}

void linear_batch_input_grad(const double* W, const double* dZ, double* dX,
                             std::size_t batch, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) collapse(2)
    for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double* ds = dZ + s * rows;
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) acc += W[r * cols + c] * ds[r];
            dX[s * cols + c] = acc;
        }
    }
}

void linear_batch_param_grad(const double* dZ, const double* X, double* G, double* gb,
                             std::size_t batch, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < rows; ++r) {
        double* gr = G + r * cols;
        double accb = 0.0;
        for (std::size_t s = 0; s < batch; ++s) {
            double dsr = dZ[s * rows + r];
            const double* xs = X + s * cols;
            for (std::size_t c = 0; c < cols; ++c) gr[c] += dsr * xs[c];
            accb += dsr;
        }
        gb[r] += accb;
    }
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double alpha, double beta1, double beta2, double eps,
                 double beta1_pow, double beta2_pow) {
    const double bc1 = 1.0 - beta1_pow;
    const double bc2 = 1.0 - beta2_pow;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        p[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace omp

// ---------------------------------------------------------------------------
// Dispatch.
// ---------------------------------------------------------------------------

namespace {
inline bool go_parallel(std::size_t work) {
    return g_parallel.load(std::memory_order_relaxed) && work >= kParallelThreshold;
}
}  // namespace

void linear(const double* W, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    if (go_parallel(rows * cols)) omp::linear(W, x, b, y, rows, cols);
    else serial::linear(W, x, b, y, rows, cols);
}

void linear_input_grad(const double* W, const double* d, double* out,
                       std::size_t rows, std::size_t cols) {
    if (go_parallel(rows * cols)) omp::linear_input_grad(W, d, out, rows, cols);
    else serial::linear_input_grad(W, d, out, rows, cols);
}

void linear_param_grad(const double* d, const double* x, double* G, double* gb,
                       std::size_t rows, std::size_t cols) {
    if (go_parallel(rows * cols)) omp::linear_param_grad(d, x, G, gb, rows, cols);
    else serial::linear_param_grad(d, x, G, gb, rows, cols);
}

void linear_batch(const double* W, const double* X, const double* b, double* Z,
                  std::size_t batch, std::size_t rows, std::size_t cols) {
    if (go_parallel(batch * rows * cols)) omp::linear_batch(W, X, b, Z, batch, rows, cols);
    else serial::linear_batch(W, X, b, Z, batch, rows, cols);
}

void linear_batch_input_grad(const double* W, const double* dZ, double* dX,
                             std::size_t batch, std::size_t rows, std::size_t cols) {
    if (go_parallel(batch * rows * cols)) omp::linear_batch_input_grad(W, dZ, dX, batch, rows, cols);
    else serial::linear_batch_input_grad(W, dZ, dX, batch, rows, cols);
}

void linear_batch_param_grad(const double* dZ, const double* X, double* G, double* gb,
                             std::size_t batch, std::size_t rows, std::size_t cols) {
    if (go_parallel(batch * rows * cols)) omp::linear_batch_param_grad(dZ, X, G, gb, batch, rows, cols);
    else serial::linear_batch_param_grad(dZ, X, G, gb, batch, rows, cols);
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double alpha, double beta1, double beta2, double eps,
                 double beta1_pow, double beta2_pow) {
    if (go_parallel(n * 8)) omp::adam_update(p, m, v, g, n, alpha, beta1, beta2, eps, beta1_pow, beta2_pow);
    else serial::adam_update(p, m, v, g, n, alpha, beta1, beta2, eps, beta1_pow, beta2_pow);
}

}  // namespace jg::kernels

#include "stdhl/kernels.hpp"

#include <atomic>
#include <omp.h>

namespace stdhl::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::int64_t kParThreshold = 1 << 15;

inline bool go_parallel(std::int64_t work) {
    return g_parallel.load(std::memory_order_relaxed) && work >= kParThreshold &&
           !omp_in_parallel();
}
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
int max_threads() { return omp_get_max_threads(); }

std::int64_t conv_future_reach(ConvMode mode, std::int64_t width, std::int64_t dilation) {
    if (mode == ConvMode::kCausal) return 0;
    return (dilation * (width - 1) + 1) / 2;  // symmetric pad, extra reach forward
}

// ---------------------------------------------------------------------------
// serial reference kernels
// ---------------------------------------------------------------------------

namespace serial {

void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        if (!accumulate) {
            for (std::int64_t j = 0; j < n; ++j) ci[j] = 0.0;
        }
        const double* ai = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double s = 0.0;
            for (std::int64_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = accumulate ? ci[j] + s : s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        if (!accumulate) {
            for (std::int64_t j = 0; j < n; ++j) ci[j] = 0.0;
        }
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            const double* bp = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void conv1d_forward(const double* x, const double* kern, const double* bias, double* out,
                    std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                    std::int64_t width, std::int64_t dilation, std::int64_t shift) {
    for (std::int64_t co = 0; co < out_ch; ++co) {
        double* o = out + co * time_len;
        const double b = bias ? bias[co] : 0.0;
        for (std::int64_t t = 0; t < time_len; ++t) o[t] = b;
        for (std::int64_t c = 0; c < in_ch; ++c) {
            const double* xc = x + c * time_len;
            const double* kc = kern + (co * in_ch + c) * width;
            for (std::int64_t w = 0; w < width; ++w) {
                const double kv = kc[w];
                if (kv == 0.0) continue;
                const std::int64_t off = shift - dilation * w;  // tap at t + off
                const std::int64_t t0 = off < 0 ? -off : 0;
                const std::int64_t t1 = off > 0 ? time_len - off : time_len;
                for (std::int64_t t = t0; t < t1; ++t) o[t] += kv * xc[t + off];
            }
        }
    }
}

void conv1d_grad_x(const double* g, const double* kern, double* gx,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift) {
    // gx[c,s] += sum_{co,w} k[co,c,w] * g[co, t] where s = t + shift - d*w
    for (std::int64_t c = 0; c < in_ch; ++c) {
        double* gxc = gx + c * time_len;
        for (std::int64_t co = 0; co < out_ch; ++co) {
            const double* gco = g + co * time_len;
            const double* kc = kern + (co * in_ch + c) * width;
            for (std::int64_t w = 0; w < width; ++w) {
                const double kv = kc[w];
                if (kv == 0.0) continue;
                const std::int64_t off = shift - dilation * w;  // s = t + off
                const std::int64_t t0 = off < 0 ? -off : 0;
                const std::int64_t t1 = off > 0 ? time_len - off : time_len;
                for (std::int64_t t = t0; t < t1; ++t) gxc[t + off] += kv * gco[t];
            }
        }
    }
}

void conv1d_grad_k(const double* g, const double* x, double* gk,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift) {
    for (std::int64_t co = 0; co < out_ch; ++co) {
        const double* gco = g + co * time_len;
        for (std::int64_t c = 0; c < in_ch; ++c) {
            const double* xc = x + c * time_len;
            double* gkc = gk + (co * in_ch + c) * width;
            for (std::int64_t w = 0; w < width; ++w) {
                const std::int64_t off = shift - dilation * w;
                const std::int64_t t0 = off < 0 ? -off : 0;
                const std::int64_t t1 = off > 0 ? time_len - off : time_len;
                double s = 0.0;
                for (std::int64_t t = t0; t < t1; ++t) s += gco[t] * xc[t + off];
                gkc[w] += s;
            }
        }
    }
}

void add(const double* a, const double* b, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void relu(const double* a, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void axpy(double alpha, const double* x, double* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels. Work is split only across independent output elements, so
// each element sees the same accumulation order as the serial reference.
// ---------------------------------------------------------------------------

namespace par {

void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        serial::matmul_nn(a + i * k, b, c + i * n, 1, k, n, accumulate);
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        serial::matmul_nt(a + i * k, b, c + i * n, 1, k, n, accumulate);
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        if (!accumulate) {
            for (std::int64_t j = 0; j < n; ++j) ci[j] = 0.0;
        }
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            const double* bp = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void conv1d_forward(const double* x, const double* kern, const double* bias, double* out,
                    std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                    std::int64_t width, std::int64_t dilation, std::int64_t shift) {
#pragma omp parallel for schedule(static)
    for (std::int64_t co = 0; co < out_ch; ++co) {
        serial::conv1d_forward(x, kern + co * in_ch * width, bias ? bias + co : nullptr,
                               out + co * time_len, in_ch, 1, time_len, width, dilation, shift);
    }
}

void conv1d_grad_x(const double* g, const double* kern, double* gx,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift) {
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < in_ch; ++c) {
        double* gxc = gx + c * time_len;
        for (std::int64_t co = 0; co < out_ch; ++co) {
            const double* gco = g + co * time_len;
            const double* kc = kern + (co * in_ch + c) * width;
            for (std::int64_t w = 0; w < width; ++w) {
                const double kv = kc[w];
                if (kv == 0.0) continue;
                const std::int64_t off = shift - dilation * w;
                const std::int64_t t0 = off < 0 ? -off : 0;
                const std::int64_t t1 = off > 0 ? time_len - off : time_len;
                for (std::int64_t t = t0; t < t1; ++t) gxc[t + off] += kv * gco[t];
            }
        }
    }
}

void conv1d_grad_k(const double* g, const double* x, double* gk,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift) {
#pragma omp parallel for schedule(static)
    for (std::int64_t co = 0; co < out_ch; ++co) {
        serial::conv1d_grad_k(g + co * time_len, x, gk + co * in_ch * width,
                              in_ch, 1, time_len, width, dilation, shift);
    }
}

void add(const double* a, const double* b, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void relu(const double* a, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void axpy(double alpha, const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace par

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
    if (go_parallel(m * k * n)) par::matmul_nn(a, b, c, m, k, n, accumulate);
    else serial::matmul_nn(a, b, c, m, k, n, accumulate);
}

void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
    if (go_parallel(m * k * n)) par::matmul_nt(a, b, c, m, k, n, accumulate);
    else serial::matmul_nt(a, b, c, m, k, n, accumulate);
}

void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
    if (go_parallel(m * k * n)) par::matmul_tn(a, b, c, m, k, n, accumulate);
    else serial::matmul_tn(a, b, c, m, k, n, accumulate);
}

void conv1d_forward(const double* x, const double* kern, const double* bias, double* out,
                    std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                    std::int64_t width, std::int64_t dilation, std::int64_t shift) {
    if (go_parallel(in_ch * out_ch * time_len * width))
        par::conv1d_forward(x, kern, bias, out, in_ch, out_ch, time_len, width, dilation, shift);
    else
        serial::conv1d_forward(x, kern, bias, out, in_ch, out_ch, time_len, width, dilation, shift);
}

void conv1d_grad_x(const double* g, const double* kern, double* gx,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift) {
    if (go_parallel(in_ch * out_ch * time_len * width))
        par::conv1d_grad_x(g, kern, gx, in_ch, out_ch, time_len, width, dilation, shift);
    else
        serial::conv1d_grad_x(g, kern, gx, in_ch, out_ch, time_len, width, dilation, shift);
}

void conv1d_grad_k(const double* g, const double* x, double* gk,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift) {
    if (go_parallel(in_ch * out_ch * time_len * width))
        par::conv1d_grad_k(g, x, gk, in_ch, out_ch, time_len, width, dilation, shift);
    else
        serial::conv1d_grad_k(g, x, gk, in_ch, out_ch, time_len, width, dilation, shift);
}

void add(const double* a, const double* b, double* out, std::int64_t n) {
    if (go_parallel(n)) par::add(a, b, out, n);
    else serial::add(a, b, out, n);
}

void mul(const double* a, const double* b, double* out, std::int64_t n) {
    if (go_parallel(n)) par::mul(a, b, out, n);
    else serial::mul(a, b, out, n);
}

void relu(const double* a, double* out, std::int64_t n) {
    if (go_parallel(n)) par::relu(a, out, n);
    else serial::relu(a, out, n);
}

void axpy(double alpha, const double* x, double* y, std::int64_t n) {
    if (go_parallel(n)) par::axpy(alpha, x, y, n);
    else serial::axpy(alpha, x, y, n);
}

}  // namespace stdhl::kernels

#pragma once

#include <cstdint>

namespace stdhl::kernels {

// Runtime switch between the serial reference kernels and the OpenMP ones.
// Both produce bit-identical results (parallelism is only ever across
// independent output elements), so the switch affects speed, not values.
bool parallel_enabled();
void set_parallel_enabled(bool on);
int max_threads();

enum class ConvMode { kCausal, kNonCausal };

// Number of future steps a non-causal kernel reaches past t. Causal: 0.
std::int64_t conv_future_reach(ConvMode mode, std::int64_t width, std::int64_t dilation);

namespace serial {

// c = a·b (m×k · k×n), overwriting or accumulating into c
void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate);
// c = a·bᵀ (a m×k, b n×k)
void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate);
// c = aᵀ·b (a k×m, b k×n)
void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate);

// out[co,t] = sum_c sum_w k[co,c,w] * x[c, t - d*w + s] (+ bias[co]),
// out-of-range taps read zero. s = conv_future_reach for non-causal, 0 for causal.
void conv1d_forward(const double* x, const double* kern, const double* bias, double* out,
                    std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                    std::int64_t width, std::int64_t dilation, std::int64_t shift);
void conv1d_grad_x(const double* g, const double* kern, double* gx,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift);
void conv1d_grad_k(const double* g, const double* x, double* gk,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift);

void add(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void relu(const double* a, double* out, std::int64_t n);
void axpy(double alpha, const double* x, double* y, std::int64_t n);  // y += alpha*x

}  // namespace serial

namespace par {

void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate);

void conv1d_forward(const double* x, const double* kern, const double* bias, double* out,
                    std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                    std::int64_t width, std::int64_t dilation, std::int64_t shift);
void conv1d_grad_x(const double* g, const double* kern, double* gx,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift);
void conv1d_grad_k(const double* g, const double* x, double* gk,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift);

void add(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void relu(const double* a, double* out, std::int64_t n);
void axpy(double alpha, const double* x, double* y, std::int64_t n);

}  // namespace par

// Dispatching entry points: pick par when enabled and the job is big enough.
void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate = false);
void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate = false);
void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate = false);
void conv1d_forward(const double* x, const double* kern, const double* bias, double* out,
                    std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                    std::int64_t width, std::int64_t dilation, std::int64_t shift);
void conv1d_grad_x(const double* g, const double* kern, double* gx,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift);
void conv1d_grad_k(const double* g, const double* x, double* gk,
                   std::int64_t in_ch, std::int64_t out_ch, std::int64_t time_len,
                   std::int64_t width, std::int64_t dilation, std::int64_t shift);
void add(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void relu(const double* a, double* out, std::int64_t n);
void axpy(double alpha, const double* x, double* y, std::int64_t n);

}  // namespace stdhl::kernels

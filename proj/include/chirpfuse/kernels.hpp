#pragma once

#include <complex>
#include <cstddef>

// Dense numeric kernels used by the feature extractor and the model graph.
//
// The primary implementations are OpenMP-parallel. Every parallel loop is
// arranged so each output element is written by exactly one thread and its
// partial sums accumulate in a fixed serial order inside that thread, so
// results are bitwise identical for any thread count.
//
// kernels::ref holds naive serial versions of the same contracts with
// independent loop structure. Tests compare the two; the benchmark tool
// times them against each other.

namespace chirpfuse::kernels {

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_radix2(std::complex<double>* data, std::size_t n);

// out[m x n] = a[m x k] * b[k x n]; adds into out when accumulate is set.
void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* out,
            bool accumulate = false);

// out[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* out,
               bool accumulate = false);

// out[k x n] = a[m x k]^T * b[m x n]
void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* out,
               bool accumulate = false);

// 3x3 convolution, stride 1, zero padding 1, so spatial dims are preserved.
// input  [cin  x h x w]
// weight [cout x cin x 3 x 3]
// bias   [cout]
// out    [cout x h x w]
void conv2d3x3_forward(std::size_t cin, std::size_t h, std::size_t w,
                       std::size_t cout, const double* input,
                       const double* weight, const double* bias, double* out);

// Accumulates d(loss)/d(input) into dinput.
void conv2d3x3_grad_input(std::size_t cin, std::size_t h, std::size_t w,
                          std::size_t cout, const double* weight,
                          const double* dout, double* dinput);

// Accumulates d(loss)/d(weight) and d(loss)/d(bias).
void conv2d3x3_grad_params(std::size_t cin, std::size_t h, std::size_t w,
                           std::size_t cout, const double* input,
                           const double* dout, double* dweight, double* dbias);

// 2x2 mean pooling, stride 2; h and w must be even.
void mean_pool2_forward(std::size_t c, std::size_t h, std::size_t w,
                        const double* in, double* out);

// Accumulates the pooling gradient; dout is [c x h/2 x w/2].
void mean_pool2_grad(std::size_t c, std::size_t h, std::size_t w,
                     const double* dout, double* din);

// Corner-aligned bilinear resize of a single [h0 x w0] plane to [h1 x w1].
void resize_bilinear(std::size_t h0, std::size_t w0, const double* in,
                     std::size_t h1, std::size_t w1, double* out);

// Magnitude spectrogram: frames the signal at the given hop, applies the
// caller-supplied window of length n_fft, and writes |X| for the one-sided
// bins. out is [(n_fft/2 + 1) x n_frames], frequency-major.
// n_frames must equal 1 + (n_samples - n_fft) / hop.
void stft_magnitude(const double* samples, std::size_t n_samples,
                    std::size_t n_fft, std::size_t hop, const double* window,
                    std::size_t n_frames, double* out);

namespace ref {

void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* out,
            bool accumulate = false);
void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* out,
               bool accumulate = false);
void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* out,
               bool accumulate = false);
void conv2d3x3_forward(std::size_t cin, std::size_t h, std::size_t w,
                       std::size_t cout, const double* input,
                       const double* weight, const double* bias, double* out);
void conv2d3x3_grad_input(std::size_t cin, std::size_t h, std::size_t w,
                          std::size_t cout, const double* weight,
                          const double* dout, double* dinput);
void conv2d3x3_grad_params(std::size_t cin, std::size_t h, std::size_t w,
                           std::size_t cout, const double* input,
                           const double* dout, double* dweight, double* dbias);
void mean_pool2_forward(std::size_t c, std::size_t h, std::size_t w,
                        const double* in, double* out);
void mean_pool2_grad(std::size_t c, std::size_t h, std::size_t w,
                     const double* dout, double* din);
void resize_bilinear(std::size_t h0, std::size_t w0, const double* in,
                     std::size_t h1, std::size_t w1, double* out);
void stft_magnitude(const double* samples, std::size_t n_samples,
                    std::size_t n_fft, std::size_t hop, const double* window,
                    std::size_t n_frames, double* out);

} // namespace ref

} // namespace chirpfuse::kernels

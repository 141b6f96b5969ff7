#include "chirpfuse/kernels.hpp"

#include <algorithm>
#include <complex>
#include <vector>

#include "chirpfuse/error.hpp"

// Serial reference kernels. Each output element is computed as one naive
// sum straight from the definition, with no blocking or loop rearrangement,
// so these stay trivially auditable. Tests hold the fast kernels to these.

namespace chirpfuse::kernels::ref {

void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* out, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += a[i * k + t] * b[t * n + j];
            double* o = out + i * n + j;
            *o = accumulate ? *o + s : s;
        }
    }
}

void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* out, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += a[i * k + t] * b[j * k + t];
            double* o = out + i * n + j;
            *o = accumulate ? *o + s : s;
        }
    }
}

void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* out, bool accumulate) {
    for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += a[i * k + t] * b[i * n + j];
            double* o = out + t * n + j;
            *o = accumulate ? *o + s : s;
        }
    }
}

namespace {

inline double at_padded(const double* plane, std::size_t h, std::size_t w,
                        std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) ||
        x >= static_cast<std::ptrdiff_t>(w))
        return 0.0;
    return plane[y * static_cast<std::ptrdiff_t>(w) + x];
}

} // namespace

void conv2d3x3_forward(std::size_t cin, std::size_t h, std::size_t w,
                       std::size_t cout, const double* input,
                       const double* weight, const double* bias, double* out) {
    for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                double s = bias[co];
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double* plane = input + ci * h * w;
                    for (std::size_t dy = 0; dy < 3; ++dy) {
                        for (std::size_t dx = 0; dx < 3; ++dx) {
                            double wv = weight[((co * cin + ci) * 3 + dy) * 3 + dx];
                            s += wv * at_padded(plane, h, w,
                                                static_cast<std::ptrdiff_t>(y + dy) - 1,
                                                static_cast<std::ptrdiff_t>(x + dx) - 1);
                        }
                    }
                }
                out[(co * h + y) * w + x] = s;
            }
        }
    }
}

void conv2d3x3_grad_input(std::size_t cin, std::size_t h, std::size_t w,
                          std::size_t cout, const double* weight,
                          const double* dout, double* dinput) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t iy = 0; iy < h; ++iy) {
            for (std::size_t ix = 0; ix < w; ++ix) {
                double s = 0.0;
                for (std::size_t co = 0; co < cout; ++co) {
                    const double* plane = dout + co * h * w;
                    for (std::size_t dy = 0; dy < 3; ++dy) {
                        for (std::size_t dx = 0; dx < 3; ++dx) {
                            double wv = weight[((co * cin + ci) * 3 + dy) * 3 + dx];
                            s += wv * at_padded(plane, h, w,
                                                static_cast<std::ptrdiff_t>(iy) + 1 -
                                                    static_cast<std::ptrdiff_t>(dy),
                                                static_cast<std::ptrdiff_t>(ix) + 1 -
                                                    static_cast<std::ptrdiff_t>(dx));
                        }
                    }
                }
                dinput[(ci * h + iy) * w + ix] += s;
            }
        }
    }
}

void conv2d3x3_grad_params(std::size_t cin, std::size_t h, std::size_t w,
                           std::size_t cout, const double* input,
                           const double* dout, double* dweight, double* dbias) {
    for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* plane = input + ci * h * w;
            for (std::size_t dy = 0; dy < 3; ++dy) {
                for (std::size_t dx = 0; dx < 3; ++dx) {
                    double s = 0.0;
                    for (std::size_t y = 0; y < h; ++y)
                        for (std::size_t x = 0; x < w; ++x)
                            s += dout[(co * h + y) * w + x] *
                                 at_padded(plane, h, w,
                                           static_cast<std::ptrdiff_t>(y + dy) - 1,
                                           static_cast<std::ptrdiff_t>(x + dx) - 1);
                    dweight[((co * cin + ci) * 3 + dy) * 3 + dx] += s;
                }
            }
        }
    }
    for (std::size_t co = 0; co < cout; ++co) {
        double s = 0.0;
        for (std::size_t i = 0; i < h * w; ++i) s += dout[co * h * w + i];
        dbias[co] += s;
    }
}

void mean_pool2_forward(std::size_t c, std::size_t h, std::size_t w,
                        const double* in, double* out) {
    std::size_t oh = h / 2, ow = w / 2;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                double s = in[(ch * h + 2 * y) * w + 2 * x] +
                           in[(ch * h + 2 * y) * w + 2 * x + 1] +
                           in[(ch * h + 2 * y + 1) * w + 2 * x] +
                           in[(ch * h + 2 * y + 1) * w + 2 * x + 1];
                out[(ch * oh + y) * ow + x] = s * 0.25;
            }
}

void mean_pool2_grad(std::size_t c, std::size_t h, std::size_t w,
                     const double* dout, double* din) {
    std::size_t oh = h / 2, ow = w / 2;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                din[(ch * h + y) * w + x] += 0.25 * dout[(ch * oh + y / 2) * ow + x / 2];
}

void resize_bilinear(std::size_t h0, std::size_t w0, const double* in,
                     std::size_t h1, std::size_t w1, double* out) {
    if (h0 == 0 || w0 == 0 || h1 == 0 || w1 == 0)
        throw InternalError("resize_bilinear: empty extent");
    double sy = h1 > 1 ? static_cast<double>(h0 - 1) / static_cast<double>(h1 - 1) : 0.0;
    double sx = w1 > 1 ? static_cast<double>(w0 - 1) / static_cast<double>(w1 - 1) : 0.0;
    for (std::size_t y = 0; y < h1; ++y) {
        for (std::size_t x = 0; x < w1; ++x) {
            double fy = sy * static_cast<double>(y);
            double fx = sx * static_cast<double>(x);
            std::size_t y0 = std::min(static_cast<std::size_t>(fy), h0 - 1);
            std::size_t x0 = std::min(static_cast<std::size_t>(fx), w0 - 1);
            std::size_t yb = std::min(y0 + 1, h0 - 1);
            std::size_t xb = std::min(x0 + 1, w0 - 1);
            double ty = fy - static_cast<double>(y0);
            double tx = fx - static_cast<double>(x0);
            out[y * w1 + x] =
                in[y0 * w0 + x0] * (1.0 - ty) * (1.0 - tx) +
                in[y0 * w0 + xb] * (1.0 - ty) * tx +
                in[yb * w0 + x0] * ty * (1.0 - tx) +
                in[yb * w0 + xb] * ty * tx;
        }
    }
}

void stft_magnitude(const double* samples, std::size_t n_samples,
                    std::size_t n_fft, std::size_t hop, const double* window,
                    std::size_t n_frames, double* out) {
    if (n_samples < n_fft || n_frames != 1 + (n_samples - n_fft) / hop)
        throw InternalError("stft_magnitude: inconsistent frame count");
    std::size_t n_bins = n_fft / 2 + 1;
    std::vector<std::complex<double>> buf(n_fft);
    for (std::size_t f = 0; f < n_frames; ++f) {
        const double* s = samples + f * hop;
        for (std::size_t i = 0; i < n_fft; ++i)
            buf[i] = std::complex<double>(window[i] * s[i], 0.0);
        fft_radix2(buf.data(), n_fft);
        for (std::size_t b = 0; b < n_bins; ++b)
            out[b * n_frames + f] = std::abs(buf[b]);
    }
}

} // namespace chirpfuse::kernels::ref

#include "chirpfuse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "chirpfuse/error.hpp"

namespace chirpfuse::kernels {

void fft_radix2(std::complex<double>* data, std::size_t n) {
    if (n == 0 || (n & (n - 1)) != 0)
        throw InternalError("fft length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                std::complex<double> u = data[i + j];
                std::complex<double> v = data[i + j + len / 2] * w;
                data[i + j] = u + v;
                data[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* out, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out + i * n;
        if (!accumulate) std::fill(orow, orow + n, 0.0);
        for (std::size_t t = 0; t < k; ++t) {
            double av = a[i * k + t];
            const double* brow = b + t * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* out, bool accumulate) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double* arow = a + i * k;
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += arow[t] * brow[t];
            double* o = out + i * n + j;
            *o = accumulate ? *o + s : s;
        }
    }
}

void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* out, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < k; ++t) {
        double* orow = out + t * n;
        if (!accumulate) std::fill(orow, orow + n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            double av = a[i * k + t];
            const double* brow = b + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

void conv2d3x3_forward(std::size_t cin, std::size_t h, std::size_t w,
                       std::size_t cout, const double* input,
                       const double* weight, const double* bias, double* out) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t y = 0; y < h; ++y) {
            double* orow = out + (co * h + y) * w;
            std::fill(orow, orow + w, bias[co]);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                for (std::size_t dy = 0; dy < 3; ++dy) {
                    // Input row index for this tap; skip taps that fall in
                    // the zero padding.
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + dy) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    const double* irow = input + (ci * h + iy) * w;
                    const double* wk = weight + ((co * cin + ci) * 3 + dy) * 3;
                    for (std::size_t dx = 0; dx < 3; ++dx) {
                        double wv = wk[dx];
                        std::size_t x0 = dx == 0 ? 1 : 0;
                        std::size_t x1 = dx == 2 ? w - 1 : w;
                        const double* ip = irow + dx - 1;
                        for (std::size_t x = x0; x < x1; ++x)
                            orow[x] += wv * ip[x];
                    }
                }
            }
        }
    }
}

void conv2d3x3_grad_input(std::size_t cin, std::size_t h, std::size_t w,
                          std::size_t cout, const double* weight,
                          const double* dout, double* dinput) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t iy = 0; iy < h; ++iy) {
            double* drow = dinput + (ci * h + iy) * w;
            for (std::size_t co = 0; co < cout; ++co) {
                for (std::size_t dy = 0; dy < 3; ++dy) {
                    std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy) + 1 -
                                        static_cast<std::ptrdiff_t>(dy);
                    if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(h)) continue;
                    const double* grow = dout + (co * h + oy) * w;
                    const double* wk = weight + ((co * cin + ci) * 3 + dy) * 3;
                    for (std::size_t dx = 0; dx < 3; ++dx) {
                        double wv = wk[dx];
                        // Output column ox = ix + 1 - dx must stay in range.
                        std::size_t x0 = dx == 2 ? 1 : 0;
                        std::size_t x1 = dx == 0 ? w - 1 : w;
                        const double* gp = grow + 1 - dx;
                        for (std::size_t x = x0; x < x1; ++x)
                            drow[x] += wv * gp[x];
                    }
                }
            }
        }
    }
}

void conv2d3x3_grad_params(std::size_t cin, std::size_t h, std::size_t w,
                           std::size_t cout, const double* input,
                           const double* dout, double* dweight, double* dbias) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t dy = 0; dy < 3; ++dy) {
                std::size_t y0 = dy == 0 ? 1 : 0;
                std::size_t y1 = dy == 2 ? h - 1 : h;
                for (std::size_t dx = 0; dx < 3; ++dx) {
                    std::size_t x0 = dx == 0 ? 1 : 0;
                    std::size_t x1 = dx == 2 ? w - 1 : w;
                    double s = 0.0;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const double* grow = dout + (co * h + y) * w;
                        const double* irow = input + (ci * h + y + dy - 1) * w + dx - 1;
                        for (std::size_t x = x0; x < x1; ++x)
                            s += grow[x] * irow[x];
                    }
                    dweight[((co * cin + ci) * 3 + dy) * 3 + dx] += s;
                }
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (std::size_t co = 0; co < cout; ++co) {
        const double* g = dout + co * h * w;
        double s = 0.0;
        for (std::size_t i = 0; i < h * w; ++i) s += g[i];
        dbias[co] += s;
    }
}

void mean_pool2_forward(std::size_t c, std::size_t h, std::size_t w,
                        const double* in, double* out) {
    std::size_t oh = h / 2, ow = w / 2;
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < oh; ++y) {
            const double* r0 = in + (ch * h + 2 * y) * w;
            const double* r1 = r0 + w;
            double* orow = out + (ch * oh + y) * ow;
            for (std::size_t x = 0; x < ow; ++x)
                orow[x] = 0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
        }
    }
}

void mean_pool2_grad(std::size_t c, std::size_t h, std::size_t w,
                     const double* dout, double* din) {
    std::size_t oh = h / 2, ow = w / 2;
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
            double* drow = din + (ch * h + y) * w;
            const double* grow = dout + (ch * oh + y / 2) * ow;
            for (std::size_t x = 0; x < w; ++x)
                drow[x] += 0.25 * grow[x / 2];
        }
    }
}

void resize_bilinear(std::size_t h0, std::size_t w0, const double* in,
                     std::size_t h1, std::size_t w1, double* out) {
    if (h0 == 0 || w0 == 0 || h1 == 0 || w1 == 0)
        throw InternalError("resize_bilinear: empty extent");
    // Corner-aligned sample positions; a singleton output axis pins to 0.
    double sy = h1 > 1 ? static_cast<double>(h0 - 1) / static_cast<double>(h1 - 1) : 0.0;
    double sx = w1 > 1 ? static_cast<double>(w0 - 1) / static_cast<double>(w1 - 1) : 0.0;
#pragma omp parallel for schedule(static)
    for (std::size_t y = 0; y < h1; ++y) {
        double fy = sy * static_cast<double>(y);
        std::size_t y0 = std::min(static_cast<std::size_t>(fy), h0 - 1);
        std::size_t yb = std::min(y0 + 1, h0 - 1);
        double ty = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < w1; ++x) {
            double fx = sx * static_cast<double>(x);
            std::size_t x0 = std::min(static_cast<std::size_t>(fx), w0 - 1);
            std::size_t xb = std::min(x0 + 1, w0 - 1);
            double tx = fx - static_cast<double>(x0);
            double top = in[y0 * w0 + x0] * (1.0 - tx) + in[y0 * w0 + xb] * tx;
            double bot = in[yb * w0 + x0] * (1.0 - tx) + in[yb * w0 + xb] * tx;
            out[y * w1 + x] = top * (1.0 - ty) + bot * ty;
        }
    }
}

void stft_magnitude(const double* samples, std::size_t n_samples,
                    std::size_t n_fft, std::size_t hop, const double* window,
                    std::size_t n_frames, double* out) {
    if (n_samples < n_fft || n_frames != 1 + (n_samples - n_fft) / hop)
        throw InternalError("stft_magnitude: inconsistent frame count");
    std::size_t n_bins = n_fft / 2 + 1;
#pragma omp parallel for schedule(static)
    for (std::size_t f = 0; f < n_frames; ++f) {
        std::vector<std::complex<double>> buf(n_fft);
        const double* s = samples + f * hop;
        for (std::size_t i = 0; i < n_fft; ++i)
            buf[i] = std::complex<double>(window[i] * s[i], 0.0);
        fft_radix2(buf.data(), n_fft);
        for (std::size_t b = 0; b < n_bins; ++b)
            out[b * n_frames + f] = std::abs(buf[b]);
    }
}

} // namespace chirpfuse::kernels

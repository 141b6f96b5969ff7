#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "chirpfuse/kernels.hpp"
#include "chirpfuse/rng.hpp"

using namespace chirpfuse;

namespace {

std::vector<double> rand_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE_EQ(a.size(), b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("parallel matmul agrees with the naive reference") {
    Rng rng(1);
    for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1},
                           {3, 5, 2},
                           {17, 31, 13},
                           {64, 64, 64}}) {
        auto a = rand_vec(rng, m * k);
        auto b = rand_vec(rng, k * n);
        std::vector<double> out(m * n), ref(m * n);
        kernels::matmul(m, k, n, a.data(), b.data(), out.data());
        kernels::ref::matmul(m, k, n, a.data(), b.data(), ref.data());
        CHECK_LT(max_abs_diff(out, ref), 1e-12);

        // Accumulate mode adds on top of existing output.
        std::vector<double> acc(m * n, 1.0), acc_ref(m * n, 1.0);
        kernels::matmul(m, k, n, a.data(), b.data(), acc.data(), true);
        kernels::ref::matmul(m, k, n, a.data(), b.data(), acc_ref.data(), true);
        CHECK_LT(max_abs_diff(acc, acc_ref), 1e-12);
        CHECK_EQ(acc[0], doctest::Approx(out[0] + 1.0));
    }
}

TEST_CASE("transposed matmuls agree with the reference") {
    Rng rng(2);
    const std::size_t m = 9, k = 7, n = 11;
    auto a = rand_vec(rng, m * k);
    auto bt = rand_vec(rng, n * k);
    std::vector<double> out(m * n), ref(m * n);
    kernels::matmul_nt(m, k, n, a.data(), bt.data(), out.data());
    kernels::ref::matmul_nt(m, k, n, a.data(), bt.data(), ref.data());
    CHECK_LT(max_abs_diff(out, ref), 1e-12);

    auto b = rand_vec(rng, m * n);
    std::vector<double> out2(k * n), ref2(k * n);
    kernels::matmul_tn(m, k, n, a.data(), b.data(), out2.data());
    kernels::ref::matmul_tn(m, k, n, a.data(), b.data(), ref2.data());
    CHECK_LT(max_abs_diff(out2, ref2), 1e-12);
}

TEST_CASE("conv forward, input gradient, and parameter gradient agree") {
    Rng rng(3);
    const std::size_t cin = 3, h = 10, w = 8, cout = 5;
    auto input = rand_vec(rng, cin * h * w);
    auto weight = rand_vec(rng, cout * cin * 9);
    auto bias = rand_vec(rng, cout);

    std::vector<double> out(cout * h * w), ref(out.size());
    kernels::conv2d3x3_forward(cin, h, w, cout, input.data(), weight.data(), bias.data(), out.data());
    kernels::ref::conv2d3x3_forward(cin, h, w, cout, input.data(), weight.data(), bias.data(), ref.data());
    CHECK_LT(max_abs_diff(out, ref), 1e-12);

    auto dout = rand_vec(rng, cout * h * w);
    std::vector<double> din(cin * h * w, 0.0), din_ref(din.size(), 0.0);
    kernels::conv2d3x3_grad_input(cin, h, w, cout, weight.data(), dout.data(), din.data());
    kernels::ref::conv2d3x3_grad_input(cin, h, w, cout, weight.data(), dout.data(), din_ref.data());
    CHECK_LT(max_abs_diff(din, din_ref), 1e-12);

    std::vector<double> dw(cout * cin * 9, 0.0), dw_ref(dw.size(), 0.0);
    std::vector<double> db(cout, 0.0), db_ref(cout, 0.0);
    kernels::conv2d3x3_grad_params(cin, h, w, cout, input.data(), dout.data(), dw.data(), db.data());
    kernels::ref::conv2d3x3_grad_params(cin, h, w, cout, input.data(), dout.data(), dw_ref.data(),
                                        db_ref.data());
    CHECK_LT(max_abs_diff(dw, dw_ref), 1e-12);
    CHECK_LT(max_abs_diff(db, db_ref), 1e-12);

    // Gradient kernels accumulate: running twice doubles the result.
    std::vector<double> din2(din);
    kernels::conv2d3x3_grad_input(cin, h, w, cout, weight.data(), dout.data(), din2.data());
    CHECK_EQ(din2[10], doctest::Approx(2.0 * din[10]));
}

TEST_CASE("mean pooling halves each spatial extent") {
    Rng rng(4);
    const std::size_t c = 2, h = 6, w = 4;
    auto input = rand_vec(rng, c * h * w);
    std::vector<double> out(c * (h / 2) * (w / 2)), ref(out.size());
    kernels::mean_pool2_forward(c, h, w, input.data(), out.data());
    kernels::ref::mean_pool2_forward(c, h, w, input.data(), ref.data());
    CHECK_LT(max_abs_diff(out, ref), 1e-15);

    auto dout = rand_vec(rng, out.size());
    std::vector<double> din(c * h * w, 0.0), din_ref(din.size(), 0.0);
    kernels::mean_pool2_grad(c, h, w, dout.data(), din.data());
    kernels::ref::mean_pool2_grad(c, h, w, dout.data(), din_ref.data());
    CHECK_LT(max_abs_diff(din, din_ref), 1e-15);
    CHECK_EQ(din[0], doctest::Approx(0.25 * dout[0]));
}

TEST_CASE("bilinear resize is corner aligned") {
    Rng rng(5);
    auto input = rand_vec(rng, 7 * 9);
    std::vector<double> out(16 * 12), ref(out.size());
    kernels::resize_bilinear(7, 9, input.data(), 16, 12, out.data());
    kernels::ref::resize_bilinear(7, 9, input.data(), 16, 12, ref.data());
    CHECK_LT(max_abs_diff(out, ref), 1e-12);
    // Corners carry through exactly.
    CHECK_EQ(out[0], doctest::Approx(input[0]));
    CHECK_EQ(out[11], doctest::Approx(input[8]));
    CHECK_EQ(out[15 * 12], doctest::Approx(input[6 * 9]));
    CHECK_EQ(out[16 * 12 - 1], doctest::Approx(input[7 * 9 - 1]));
}

TEST_CASE("windowed magnitude frames agree with the serial reference") {
    Rng rng(6);
    const std::size_t n_fft = 64, hop = 16;
    const std::size_t n_samples = 500;
    const std::size_t n_frames = 1 + (n_samples - n_fft) / hop;
    auto samples = rand_vec(rng, n_samples);
    std::vector<double> window(n_fft);
    for (std::size_t i = 0; i < n_fft; ++i)
        window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(i) / double(n_fft)));

    std::vector<double> out((n_fft / 2 + 1) * n_frames), ref(out.size());
    kernels::stft_magnitude(samples.data(), n_samples, n_fft, hop, window.data(), n_frames, out.data());
    kernels::ref::stft_magnitude(samples.data(), n_samples, n_fft, hop, window.data(), n_frames,
                                 ref.data());
    CHECK_LT(max_abs_diff(out, ref), 1e-12);
}

TEST_CASE("fft rejects non-power-of-two lengths") {
    std::vector<std::complex<double>> buf(6);
    CHECK_THROWS(kernels::fft_radix2(buf.data(), buf.size()));
}

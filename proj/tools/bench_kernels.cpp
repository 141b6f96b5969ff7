#include <chrono>
#include <cstdio>
#include <vector>

#include "chirpfuse/kernels.hpp"
#include "chirpfuse/rng.hpp"

using namespace chirpfuse;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_seconds();
        fn();
        best = std::min(best, now_seconds() - t0);
    }
    return best;
}

void fill(Rng& rng, std::vector<double>& v) {
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
}

void report(const char* name, double parallel, double reference) {
    std::printf("%-24s parallel %8.3f ms   reference %8.3f ms   speedup %5.2fx\n", name,
                parallel * 1e3, reference * 1e3, reference / parallel);
}

} // namespace

int main() {
    Rng rng(7);

    {
        const std::size_t m = 256, k = 256, n = 256;
        std::vector<double> a(m * k), b(k * n), out(m * n), out_ref(m * n);
        fill(rng, a);
        fill(rng, b);
        const double tp = time_best_of(5, [&] { kernels::matmul(m, k, n, a.data(), b.data(), out.data()); });
        const double tr = time_best_of(5, [&] { kernels::ref::matmul(m, k, n, a.data(), b.data(), out_ref.data()); });
        report("matmul 256^3", tp, tr);
    }

    {
        const std::size_t cin = 16, h = 64, w = 64, cout = 32;
        std::vector<double> input(cin * h * w), weight(cout * cin * 9), bias(cout, 0.0);
        std::vector<double> out(cout * h * w), out_ref(cout * h * w);
        fill(rng, input);
        fill(rng, weight);
        const double tp = time_best_of(5, [&] {
            kernels::conv2d3x3_forward(cin, h, w, cout, input.data(), weight.data(), bias.data(), out.data());
        });
        const double tr = time_best_of(5, [&] {
            kernels::ref::conv2d3x3_forward(cin, h, w, cout, input.data(), weight.data(), bias.data(), out_ref.data());
        });
        report("conv3x3 16->32 @64x64", tp, tr);
    }

    {
        const std::size_t n_fft = 1024, hop = 256;
        const std::size_t n_samples = 3 * 22050;
        const std::size_t n_frames = 1 + (n_samples - n_fft) / hop;
        std::vector<double> samples(n_samples), window(n_fft, 1.0);
        std::vector<double> out((n_fft / 2 + 1) * n_frames), out_ref(out.size());
        fill(rng, samples);
        const double tp = time_best_of(5, [&] {
            kernels::stft_magnitude(samples.data(), n_samples, n_fft, hop, window.data(), n_frames, out.data());
        });
        const double tr = time_best_of(5, [&] {
            kernels::ref::stft_magnitude(samples.data(), n_samples, n_fft, hop, window.data(), n_frames, out_ref.data());
        });
        report("stft 3s @22050", tp, tr);
    }

    return 0;
}

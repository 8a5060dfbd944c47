// Timing comparison of the serial reference kernels against the OpenMP ones,
// plus a whole-model gradient step at 1..max threads.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include <omp.h>

#include "stdhl/data.hpp"
#include "stdhl/kernels.hpp"
#include "stdhl/model.hpp"
#include "stdhl/rng.hpp"
#include "stdhl/tensor.hpp"
#include "stdhl/training.hpp"

using namespace stdhl;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<double> random_vec(Rng& rng, std::int64_t n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

void row(const char* name, double serial_ms, double par_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, par_ms,
                serial_ms / par_ms);
}

}  // namespace

int main() {
    Rng rng(7);
    std::printf("threads available: %d\n\n", omp_get_max_threads());
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    {
        const std::int64_t n = 384;
        auto a = random_vec(rng, n * n), b = random_vec(rng, n * n);
        std::vector<double> c(static_cast<std::size_t>(n * n));
        row("matmul 384x384",
            time_ms([&] { kernels::serial::matmul_nn(a.data(), b.data(), c.data(), n, n, n, false); }, 5),
            time_ms([&] { kernels::par::matmul_nn(a.data(), b.data(), c.data(), n, n, n, false); }, 5));
    }
    {
        const std::int64_t cin = 64, cout = 64, tl = 512, w = 3;
        auto x = random_vec(rng, cin * tl);
        auto k = random_vec(rng, cout * cin * w);
        auto bias = random_vec(rng, cout);
        std::vector<double> out(static_cast<std::size_t>(cout * tl));
        row("conv1d 64ch x 512",
            time_ms([&] { kernels::serial::conv1d_forward(x.data(), k.data(), bias.data(),
                                                          out.data(), cin, cout, tl, w, 2, 0); }, 10),
            time_ms([&] { kernels::par::conv1d_forward(x.data(), k.data(), bias.data(),
                                                       out.data(), cin, cout, tl, w, 2, 0); }, 10));
    }
    {
        const std::int64_t n = 1 << 20;
        auto a = random_vec(rng, n), b = random_vec(rng, n);
        std::vector<double> out(static_cast<std::size_t>(n));
        row("elementwise mul 1M",
            time_ms([&] { kernels::serial::mul(a.data(), b.data(), out.data(), n); }, 10),
            time_ms([&] { kernels::par::mul(a.data(), b.data(), out.data(), n); }, 10));
    }

    // whole training batch: chunk-parallel gradients vs one thread
    ModelConfig cfg;
    cfg.n_nodes = 10;
    cfg.hidden = 32;
    SynthOptions sopt;
    sopt.length = 200;
    const PowerCurve curve = PowerCurve::default_ge15();
    auto series = synth_dataset(sopt, curve);
    WindowOptions wopt;
    auto windows = make_windows(series, wopt).samples;
    windows.resize(64);
    auto model = make_forecaster("stdhl", cfg);
    TrainConfig tcfg;
    tcfg.max_epochs = 1;
    tcfg.patience = 1;

    const int max_threads = omp_get_max_threads();
    std::printf("\n%-28s %13s\n", "stdhl 64-sample epoch", "time");
    for (int t = 1; t <= max_threads; t *= 2) {
        omp_set_num_threads(t);
        auto m = model->clone();
        const double ms = time_ms(
            [&] {
                auto mm = m->clone();
                train(*mm, windows, windows, tcfg);
            },
            1);
        std::printf("  %2d thread(s)              %10.1f ms\n", t, ms);
    }
    omp_set_num_threads(max_threads);
    return 0;
}

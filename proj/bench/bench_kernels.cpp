// Timing comparison of the serial and OpenMP kernel runners on the shapes the
// training loop actually uses.  Prints one row per kernel with GFLOP/s for
// both runners and the speedup, and verifies the two outputs are bit-equal.
//
// Usage: bench_kernels [batch] [repeats]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "randrl/kernels.hpp"
#include "randrl/rng.hpp"
#include "randrl/tensor.hpp"

using randrl::Rng;
using randrl::Tensor;
namespace K = randrl::kernels;

namespace {

double now_sec() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

Tensor randn(std::vector<int64_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<float>(rng.normal());
    return t;
}

struct Row {
    std::string name;
    double flops;       // per invocation
    double serial_sec;
    double parallel_sec;
    bool bitwise_equal;
};

template <typename F>
double time_best(F&& fn, int repeats) {
    double best = 1e30;
    for (int r = 0; r < repeats; ++r) {
        const double t0 = now_sec();
        fn();
        best = std::min(best, now_sec() - t0);
    }
    return best;
}

Row bench_conv(const char* name, const K::ConvDims& d, int repeats, Rng& rng) {
    Tensor x = randn({d.n, d.ci, d.h, d.w}, rng);
    Tensor w = randn({d.co, d.ci, d.k, d.k}, rng);
    Tensor b = randn({d.co}, rng);
    Tensor y_par({d.n, d.co, d.h_out(), d.w_out()});
    Tensor y_ser({d.n, d.co, d.h_out(), d.w_out()});
    const double flops = 2.0 * d.n * d.co * d.h_out() * d.w_out() * d.ci * d.k * d.k;
    Row row{name, flops, 0.0, 0.0, false};
    row.serial_sec = time_best(
        [&] { K::serial::conv2d_forward(x.data(), w.data(), b.data(), y_ser.data(), d); },
        repeats);
    row.parallel_sec = time_best(
        [&] { K::conv2d_forward(x.data(), w.data(), b.data(), y_par.data(), d); },
        repeats);
    row.bitwise_equal = std::memcmp(y_par.data(), y_ser.data(),
                                    sizeof(float) * y_par.numel()) == 0;
    return row;
}

Row bench_conv_bwdw(const char* name, const K::ConvDims& d, int repeats, Rng& rng) {
    Tensor x = randn({d.n, d.ci, d.h, d.w}, rng);
    Tensor gy = randn({d.n, d.co, d.h_out(), d.w_out()}, rng);
    Tensor gw_par({d.co, d.ci, d.k, d.k});
    Tensor gw_ser({d.co, d.ci, d.k, d.k});
    const double flops = 2.0 * d.n * d.co * d.h_out() * d.w_out() * d.ci * d.k * d.k;
    Row row{name, flops, 0.0, 0.0, false};
    row.serial_sec = time_best(
        [&] {
            gw_ser.fill(0.0f);
            K::serial::conv2d_backward_weight(x.data(), gy.data(), gw_ser.data(), nullptr, d);
        },
        repeats);
    row.parallel_sec = time_best(
        [&] {
            gw_par.fill(0.0f);
            K::conv2d_backward_weight(x.data(), gy.data(), gw_par.data(), nullptr, d);
        },
        repeats);
    row.bitwise_equal = std::memcmp(gw_par.data(), gw_ser.data(),
                                    sizeof(float) * gw_par.numel()) == 0;
    return row;
}

Row bench_dense(const char* name, int n, int in, int out, int repeats, Rng& rng) {
    Tensor x = randn({n, in}, rng);
    Tensor w = randn({out, in}, rng);
    Tensor b = randn({out}, rng);
    Tensor y_par({n, out}), y_ser({n, out});
    const double flops = 2.0 * n * in * out;
    Row row{name, flops, 0.0, 0.0, false};
    row.serial_sec = time_best(
        [&] { K::serial::dense_forward(x.data(), w.data(), b.data(), y_ser.data(), n, in, out); },
        repeats);
    row.parallel_sec = time_best(
        [&] { K::dense_forward(x.data(), w.data(), b.data(), y_par.data(), n, in, out); },
        repeats);
    row.bitwise_equal = std::memcmp(y_par.data(), y_ser.data(),
                                    sizeof(float) * y_par.numel()) == 0;
    return row;
}

}  // namespace

int main(int argc, char** argv) {
    const int batch = argc > 1 ? std::atoi(argv[1]) : 256;
    const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled (serial build)\n");
#endif
    std::printf("batch = %d, best of %d repeats\n\n", batch, repeats);

    Rng rng(2024);
    std::vector<Row> rows;
    // trunk shapes on 48x48 observations
    rows.push_back(bench_conv("conv 3->16 48x48 fwd",
                              K::ConvDims{batch, 3, 48, 48, 16, 3, 1, 1}, repeats, rng));
    rows.push_back(bench_conv("conv 16->32 24x24 fwd",
                              K::ConvDims{batch, 16, 24, 24, 32, 3, 1, 1}, repeats, rng));
    rows.push_back(bench_conv("conv 32->32 12x12 fwd",
                              K::ConvDims{batch, 32, 12, 12, 32, 3, 1, 1}, repeats, rng));
    rows.push_back(bench_conv("randomizer 3->3 48x48",
                              K::ConvDims{batch, 3, 48, 48, 3, 3, 1, 1}, repeats, rng));
    rows.push_back(bench_conv_bwdw("conv 16->32 24x24 bwd-w",
                                   K::ConvDims{batch, 16, 24, 24, 32, 3, 1, 1}, repeats, rng));
    rows.push_back(bench_dense("dense 1152->256", batch, 1152, 256, repeats, rng));

    std::printf("%-28s %10s %10s %10s %8s %s\n", "kernel", "GFLOP/s(1)", "GFLOP/s(P)",
                "speedup", "ms(P)", "bit-equal");
    bool all_equal = true;
    for (const Row& r : rows) {
        all_equal = all_equal && r.bitwise_equal;
        std::printf("%-28s %10.2f %10.2f %9.2fx %8.2f %s\n", r.name.c_str(),
                    r.flops / r.serial_sec / 1e9, r.flops / r.parallel_sec / 1e9,
                    r.serial_sec / r.parallel_sec, r.parallel_sec * 1e3,
                    r.bitwise_equal ? "yes" : "NO");
    }
    if (!all_equal) {
        std::printf("\nERROR: serial and parallel runners disagree\n");
        return 1;
    }
    return 0;
}

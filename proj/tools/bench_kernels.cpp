// Times the OpenMP kernels against the serial reference implementations.
// Usage: bench_kernels [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include "latencut/tensor.hpp"
#include "latencut/threads.hpp"
#include "reference.hpp"

using namespace latencut;

namespace {

Matrix random_matrix(int r, int c, uint64_t seed) {
    Matrix m(r, c);
    std::mt19937_64 rng(seed);
    for (auto& v : m.data) v = -1.0f + 2.0f * (float(rng() >> 40) * 0x1.0p-24f);
    return m;
}

template <class F>
double best_ms(F&& f, int reps = 5) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto dt = std::chrono::steady_clock::now() - t0;
        best = std::min(best, std::chrono::duration<double, std::milli>(dt).count());
    }
    return best;
}

void bench_matmul(int m, int k, int n) {
    const Matrix a = random_matrix(m, k, 1);
    const Matrix b = random_matrix(k, n, 2);
    volatile float sink = 0.0f; // keep the results alive
    const double engine = best_ms([&] { sink = matmul(a, b).at(0, 0); });
    const double serial = best_ms([&] { sink = ref::matmul(a, b).at(0, 0); });
    (void)sink;
    const double gflop = 2.0 * m * n * k * 1e-9;
    std::printf("matmul %4dx%4dx%4d  engine %8.2f ms (%6.2f GFLOP/s)  reference %8.2f ms "
                "(%6.2f GFLOP/s)  x%.1f\n",
                m, k, n, engine, gflop / engine * 1e3, serial, gflop / serial * 1e3,
                serial / engine);
}

void bench_softmax(int t) {
    const Matrix x = random_matrix(t, t, 3);
    volatile float sink = 0.0f;
    const double engine = best_ms([&] { sink = softmax_rows(x).at(0, 0); });
    const double serial = best_ms([&] { sink = ref::softmax_rows(x).at(0, 0); });
    (void)sink;
    std::printf("softmax %4dx%4d      engine %8.2f ms                    reference %8.2f ms  "
                "                 x%.1f\n",
                t, t, engine, serial, serial / engine);
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) set_kernel_threads(std::atoi(argv[1]));
    std::printf("kernel threads: %d\n\n", kernel_threads());
    bench_matmul(256, 256, 256);
    bench_matmul(512, 512, 512);
    bench_matmul(512, 768, 768);   // encoder projection shape
    bench_matmul(512, 768, 3072);  // feed-forward shape
    bench_softmax(512);
    return 0;
}

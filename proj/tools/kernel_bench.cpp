// Benchmarks the OpenMP kernels against their serial reference
// implementations and cross-checks the results while doing so.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gorp/linalg.hpp"
#include "gorp/matrix.hpp"
#include "gorp/ref_kernels.hpp"
#include "gorp/rng.hpp"

using namespace gorp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix random_matrix(Rng& rng, std::size_t m, std::size_t n) {
    Matrix out(m, n);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = rng.gauss();
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

void bench_matmul(std::size_t n, int reps) {
    Rng rng(1);
    const Matrix a = random_matrix(rng, n, n);
    const Matrix b = random_matrix(rng, n, n);

    Matrix parallel_out;
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        parallel_out = matmul(a, b);
    }
    const double par = seconds_since(t0) / reps;

    Matrix serial_out;
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        serial_out = ref::matmul(a, b);
    }
    const double ser = seconds_since(t0) / reps;

    const double gflop = 2.0 * static_cast<double>(n) * n * n * 1e-9;
    std::printf("matmul %4zu^2   parallel %8.2f ms (%6.2f GF/s)   serial %8.2f ms   "
                "speedup %5.2fx   max|diff| %g\n",
                n, par * 1e3, gflop / par, ser * 1e3, ser / par,
                max_abs_diff(parallel_out, serial_out));
}

void bench_adam(std::size_t n, int reps) {
    Rng rng(2);
    const Matrix g = random_matrix(rng, n, n);
    Matrix m(n, n);
    Matrix v(n, n);
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        adam_update_moments(m, v, g, 0.9, 0.999);
    }
    const double par = seconds_since(t0) / reps;

    Matrix m_ref(n, n);
    Matrix v_ref(n, n);
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        ref::adam_update_moments(m_ref, v_ref, g, 0.9, 0.999);
    }
    const double ser = seconds_since(t0) / reps;
    std::printf("adam   %4zu^2   parallel %8.3f ms                 serial %8.3f ms   "
                "speedup %5.2fx   max|diff| %g\n",
                n, par * 1e3, ser * 1e3, ser / par, max_abs_diff(m, m_ref));
}

void bench_projection(std::size_t m, std::size_t q, std::size_t n, int reps) {
    Rng rng(3);
    const Matrix basis = orthonormalize(random_matrix(rng, m, q), 1e-10);
    const Matrix g = random_matrix(rng, m, n);

    Matrix parallel_out;
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        parallel_out = g;
        axpy(-1.0, matmul(basis, matmul_at_b(basis, g)), parallel_out);
    }
    const double par = seconds_since(t0) / reps;

    Matrix serial_out;
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        serial_out = ref::project_out(basis, g);
    }
    const double ser = seconds_since(t0) / reps;
    std::printf("proj %zux%zu q=%zu parallel %8.3f ms                 serial %8.3f ms   "
                "speedup %5.2fx   max|diff| %g\n",
                m, n, q, par * 1e3, ser * 1e3, ser / par, max_abs_diff(parallel_out, serial_out));
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled (serial build)\n");
#endif
    bench_matmul(128, 10);
    bench_matmul(256, 5);
    bench_matmul(512, 2);
    bench_adam(512, 20);
    bench_adam(1024, 10);
    bench_projection(512, 64, 512, 10);
    return 0;
}

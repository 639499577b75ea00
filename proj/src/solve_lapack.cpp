#include <lapacke.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>

#include "mtn/assembly.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <cpuid.h>
#endif

namespace {

// OpenBLAS picks its kernels from CPUID at init time and falls back to a
// pre-AVX generic target when the CPU model is masked (virtualized hosts).
// The static library initializes lazily, so an early env override is honored.
// Raw CPUID is used because __builtin_cpu_supports relies on a libgcc
// constructor that may not have run yet at this priority.
bool cpu_has_avx512f() {
#if defined(__x86_64__) || defined(__i386__)
  unsigned a, b, c, d;
  if (!__get_cpuid_count(7, 0, &a, &b, &c, &d)) return false;
  return (b >> 16) & 1u;
#else
  return false;
#endif
}

__attribute__((constructor(101))) void select_blas_kernel() {
  if (!std::getenv("OPENBLAS_CORETYPE") && cpu_has_avx512f())
    setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 1);
}

}  // namespace

namespace mtn {

Vector lstsq_minimum_norm(Matrix& F, const Vector& T, double rank_tol, SolveInfo* info) {
  const auto m = static_cast<lapack_int>(F.rows());
  const auto n = static_cast<lapack_int>(F.cols());
  const lapack_int ldb = std::max(m, n);

  Vector b = Vector::Zero(ldb);
  b.head(m) = T;
  Vector sigma(std::min(m, n));
  lapack_int rank = 0;

  const auto t0 = std::chrono::steady_clock::now();
  const lapack_int ret = LAPACKE_dgelsd(LAPACK_COL_MAJOR, m, n, 1, F.data(), m, b.data(), ldb,
                                        sigma.data(), rank_tol, &rank);
  const auto t1 = std::chrono::steady_clock::now();
  if (ret != 0) throw NumericalError("lstsq_minimum_norm: dgelsd failed, info=" +
                                     std::to_string(ret));

  if (info) {
    info->rank = rank;
    info->sigma_max = sigma[0];
    info->seconds = std::chrono::duration<double>(t1 - t0).count();
  }
  return b.head(n);
}

}  // namespace mtn

#pragma once

#include <cstddef>
#include <string_view>

// Dense inner-loop kernels. Every routine has a scalar reference version and,
// on x86-64, an AVX2/FMA version. One table is selected per process at first
// use; PITS_FORCE_SCALAR=1 pins the scalar table.
namespace pits::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);

// Table for a specific ISA; throws if the ISA is not compiled in or not
// supported by the running CPU.
const KernelTable& table(Isa isa);

// Table chosen for this process.
const KernelTable& active();

// Overrides the active table (tests and benchmarks only).
void set_active(Isa isa);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }

namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
#if defined(PITS_HAVE_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
#endif
}  // namespace detail

}  // namespace pits::kernels

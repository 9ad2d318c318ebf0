#pragma once

#include <cstddef>

// Matrix-free kernels for the 5-point Laplacian on an m x m interior grid
// (row-major, zero Dirichlet boundary). Every kernel has a serial path and
// an OpenMP path selected at run time; the serial path is the reference.
namespace mlleja::kernels {

enum class Exec { Serial, Parallel };

// out = (4u - sum of neighbours); the discrete Laplacian scaled by h^2.
void apply_laplacian(Exec exec, int m, const double* u, double* out);
double dot(Exec exec, std::size_t n, const double* a, const double* b);
// y += alpha x
void axpy(Exec exec, std::size_t n, double alpha, const double* x, double* y);
// y = x + beta y
void xpby(Exec exec, std::size_t n, const double* x, double beta, double* y);
// z = M^{-1} r for the symmetric red-black Gauss-Seidel preconditioner.
void rb_sgs(Exec exec, int m, const double* r, double* z);

struct PcgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Solves (scaled Laplacian) u = rhs starting from u = 0.
PcgResult pcg_poisson(Exec exec, int m, const double* rhs, double* u, double rel_tol, int max_iter);

}  // namespace mlleja::kernels

#include "mlleja/kernels.hpp"

#include <cmath>
#include <vector>

namespace mlleja::kernels {

namespace {
inline double at(const double* u, int m, int i, int j) {
  return (i < 0 || j < 0 || i >= m || j >= m) ? 0.0 : u[static_cast<std::size_t>(i) * m + j];
}
inline double neighbours(const double* u, int m, int i, int j) {
  return at(u, m, i - 1, j) + at(u, m, i + 1, j) + at(u, m, i, j - 1) + at(u, m, i, j + 1);
}
}  // namespace

void apply_laplacian(Exec exec, int m, const double* u, double* out) {
#pragma omp parallel for if (exec == Exec::Parallel)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(i) * m + j] = 4.0 * u[static_cast<std::size_t>(i) * m + j] - neighbours(u, m, i, j);
}

double dot(Exec exec, std::size_t n, const double* a, const double* b) {
  double s = 0.0;
#pragma omp parallel for reduction(+ : s) if (exec == Exec::Parallel)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(Exec exec, std::size_t n, double alpha, const double* x, double* y) {
#pragma omp parallel for if (exec == Exec::Parallel)
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void xpby(Exec exec, std::size_t n, const double* x, double beta, double* y) {
#pragma omp parallel for if (exec == Exec::Parallel)
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + beta * y[i];
}

void rb_sgs(Exec exec, int m, const double* r, double* z) {
  // Red points ((i + j) even) only couple to black points and vice versa, so
  // each colour sweep is embarrassingly parallel. Forward sweep red, black;
  // backward sweep black (unchanged), red.
  auto sweep = [&](int colour, bool zero_others) {
#pragma omp parallel for if (exec == Exec::Parallel)
    for (int i = 0; i < m; ++i)
      for (int j = (i + colour) % 2; j < m; j += 2) {
        const std::size_t idx = static_cast<std::size_t>(i) * m + j;
        z[idx] = zero_others ? 0.25 * r[idx] : 0.25 * (r[idx] + neighbours(z, m, i, j));
      }
  };
  sweep(0, true);
  sweep(1, false);
  sweep(0, false);
}

PcgResult pcg_poisson(Exec exec, int m, const double* rhs, double* u, double rel_tol, int max_iter) {
  const std::size_t n = static_cast<std::size_t>(m) * m;
  std::vector<double> r(rhs, rhs + n), z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = 0.0;
  PcgResult res;
  const double bnorm = std::sqrt(dot(exec, n, rhs, rhs));
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  rb_sgs(exec, m, r.data(), z.data());
  p = z;
  double rz = dot(exec, n, r.data(), z.data());
  for (int it = 1; it <= max_iter; ++it) {
    apply_laplacian(exec, m, p.data(), q.data());
    const double alpha = rz / dot(exec, n, p.data(), q.data());
    axpy(exec, n, alpha, p.data(), u);
    axpy(exec, n, -alpha, q.data(), r.data());
    res.iterations = it;
    res.relative_residual = std::sqrt(dot(exec, n, r.data(), r.data())) / bnorm;
    if (res.relative_residual <= rel_tol) {
      res.converged = true;
      return res;
    }
    rb_sgs(exec, m, r.data(), z.data());
    const double rz_new = dot(exec, n, r.data(), z.data());
    xpby(exec, n, z.data(), rz_new / rz, p.data());
    rz = rz_new;
  }
  return res;
}

}  // namespace mlleja::kernels

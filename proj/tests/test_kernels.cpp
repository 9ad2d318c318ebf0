#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>
#include <vector>

#include "mlleja/kernels.hpp"

using namespace mlleja::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("serial and parallel paths agree") {
  for (int m : {7, 63, 200}) {
    const std::size_t n = static_cast<std::size_t>(m) * m;
    const auto u = random_vec(n, m), v = random_vec(n, m + 1);
    std::vector<double> a(n), b(n);
    apply_laplacian(Exec::Serial, m, u.data(), a.data());
    apply_laplacian(Exec::Parallel, m, u.data(), b.data());
    CHECK(max_abs_diff(a, b) == 0.0);
    rb_sgs(Exec::Serial, m, u.data(), a.data());
    rb_sgs(Exec::Parallel, m, u.data(), b.data());
    CHECK(max_abs_diff(a, b) < 1e-13);
    const double ds = dot(Exec::Serial, n, u.data(), v.data());
    CHECK(dot(Exec::Parallel, n, u.data(), v.data()) == doctest::Approx(ds).epsilon(1e-12));
    a = v;
    b = v;
    axpy(Exec::Serial, n, 0.3, u.data(), a.data());
    axpy(Exec::Parallel, n, 0.3, u.data(), b.data());
    CHECK(max_abs_diff(a, b) == 0.0);
    xpby(Exec::Serial, n, u.data(), -1.5, a.data());
    xpby(Exec::Parallel, n, u.data(), -1.5, b.data());
    CHECK(max_abs_diff(a, b) == 0.0);
  }
}

TEST_CASE("operator and preconditioner are symmetric") {
  const int m = 31;
  const std::size_t n = m * m;
  const auto u = random_vec(n, 1), v = random_vec(n, 2);
  std::vector<double> au(n), av(n);
  apply_laplacian(Exec::Serial, m, u.data(), au.data());
  apply_laplacian(Exec::Serial, m, v.data(), av.data());
  CHECK(dot(Exec::Serial, n, v.data(), au.data()) == doctest::Approx(dot(Exec::Serial, n, u.data(), av.data())).epsilon(1e-12));
  CHECK(dot(Exec::Serial, n, u.data(), au.data()) > 0.0);
  rb_sgs(Exec::Serial, m, u.data(), au.data());
  rb_sgs(Exec::Serial, m, v.data(), av.data());
  CHECK(dot(Exec::Serial, n, v.data(), au.data()) == doctest::Approx(dot(Exec::Serial, n, u.data(), av.data())).epsilon(1e-12));
  CHECK(dot(Exec::Serial, n, u.data(), au.data()) > 0.0);
}

TEST_CASE("PCG recovers a manufactured solution") {
  for (auto exec : {Exec::Serial, Exec::Parallel}) {
    const int m = 127;
    const std::size_t n = m * m;
    const auto exact = random_vec(n, 5);
    std::vector<double> rhs(n), u(n, 0.0);
    apply_laplacian(Exec::Serial, m, exact.data(), rhs.data());
    const auto res = pcg_poisson(exec, m, rhs.data(), u.data(), 1e-12, 2000);
    CHECK(res.converged);
    CHECK(res.relative_residual <= 1e-12);
    CHECK(res.iterations < 300);
    CHECK(max_abs_diff(u, exact) < 1e-8);
  }
}

TEST_CASE("PCG reports non-convergence") {
  const int m = 63;
  const auto rhs = random_vec(m * m, 9);
  std::vector<double> u(m * m, 0.0);
  const auto res = pcg_poisson(Exec::Serial, m, rhs.data(), u.data(), 1e-14, 3);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 3);
}

}

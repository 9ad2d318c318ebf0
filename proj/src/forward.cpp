#include "mlleja/forward.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mlleja/error.hpp"
#include "mlleja/rng.hpp"

namespace mlleja {

std::vector<double> AnalyticSineModel::operator()(std::span<const double> theta) const {
  if (theta.size() != 2) throw std::domain_error("sine model expects two parameters");
  const double a = 20.0 * theta[0] + 1.0;
  const double w = theta[1] + 1.2;
  const double wpi = w * std::numbers::pi;
  const double scale = a / (wpi * wpi);
  std::vector<double> g(kObservations);
  for (int j = 0; j < kObservations; ++j) {
    const double x = observation_point(j);
    g[j] = scale * (std::sin(wpi * x) - std::sin(wpi) * x);
  }
  return g;
}

PoissonSourceModel2D::PoissonSourceModel2D(double alpha, kernels::Exec exec) : alpha_(alpha), exec_(exec) {
  if (!(alpha > 0.0)) throw std::domain_error("source width must be positive");
}

double PoissonSourceModel2D::amplitude() const { return 5.0 / (2.0 * std::numbers::pi * alpha_ * alpha_); }

int PoissonSourceModel2D::cells(int mesh_level) {
  if (mesh_level < 2 || mesh_level > kMaxMeshLevel) throw std::domain_error("mesh level out of range");
  return 1 << mesh_level;
}

std::array<double, 2> PoissonSourceModel2D::sensor_location(int s) {
  return {0.2 * (s / 4 + 1), 0.2 * (s % 4 + 1)};
}

namespace {

// Weights of the bilinear read-off of sensor s on interior nodes.
std::vector<std::pair<std::size_t, double>> sensor_stencil(int s, int n) {
  const int m = n - 1;
  const auto loc = PoissonSourceModel2D::sensor_location(s);
  const double gx = loc[0] * n, gy = loc[1] * n;
  int ix = std::min(static_cast<int>(std::floor(gx)), n - 1);
  int iy = std::min(static_cast<int>(std::floor(gy)), n - 1);
  const double fx = gx - ix, fy = gy - iy;
  std::vector<std::pair<std::size_t, double>> out;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const int gi = ix + a, gj = iy + b;  // full-grid node, 0..n
      if (gi <= 0 || gj <= 0 || gi >= n || gj >= n) continue;
      const double w = (a ? fx : 1.0 - fx) * (b ? fy : 1.0 - fy);
      if (w != 0.0) out.emplace_back(static_cast<std::size_t>(gi - 1) * m + (gj - 1), w);
    }
  return out;
}

std::vector<double> bump_profile(double centre, double alpha, int n) {
  const double h = 1.0 / n;
  std::vector<double> e(n - 1);
  for (int i = 0; i < n - 1; ++i) {
    const double d = (i + 1) * h - centre;
    e[i] = std::exp(-d * d / (2.0 * alpha * alpha));
  }
  return e;
}

void check_theta(std::span<const double> theta) {
  if (theta.size() != 2 && theta.size() != 4) throw std::domain_error("source model expects 2 or 4 parameters");
  for (double t : theta)
    if (!std::isfinite(t)) throw std::domain_error("non-finite source location");
}

}  // namespace

std::vector<double> read_sensors(std::span<const double> interior, int cells) {
  std::vector<double> out(PoissonSourceModel2D::kSensors, 0.0);
  for (int s = 0; s < PoissonSourceModel2D::kSensors; ++s)
    for (const auto& [idx, w] : sensor_stencil(s, cells)) out[s] += w * interior[idx];
  return out;
}

std::vector<double> PoissonSourceModel2D::rhs(std::span<const double> theta, int mesh_level) const {
  const int n = cells(mesh_level);
  const int m = n - 1;
  const double h = 1.0 / n;
  std::vector<double> f(static_cast<std::size_t>(m) * m, 0.0);
  for (std::size_t b = 0; b + 1 < theta.size(); b += 2) {
    const auto ex = bump_profile(theta[b], alpha_, n);
    const auto ey = bump_profile(theta[b + 1], alpha_, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) f[static_cast<std::size_t>(i) * m + j] += amplitude() * h * h * ex[i] * ey[j];
  }
  return f;
}

std::vector<double> PoissonSourceModel2D::solve_field(std::span<const double> theta, int mesh_level) const {
  check_theta(theta);
  const int n = cells(mesh_level);
  const int m = n - 1;
  const auto f = rhs(theta, mesh_level);
  std::vector<double> u(f.size());
  const auto res = kernels::pcg_poisson(exec_, m, f.data(), u.data(), rel_tol_, 10 * m * m);
  if (!res.converged) throw NumericalError("PCG did not converge on mesh level " + std::to_string(mesh_level));
  ++solves_[mesh_level];
  return u;
}

std::vector<double> PoissonSourceModel2D::sensors(std::span<const double> theta, int mesh_level) const {
  return read_sensors(solve_field(theta, mesh_level), cells(mesh_level));
}

const std::vector<std::vector<double>>& PoissonSourceModel2D::representers(int mesh_level) const {
  std::lock_guard lock(repr_mutex_);
  auto& slot = repr_[mesh_level];
  if (!slot) {
    const int n = cells(mesh_level);
    const int m = n - 1;
    auto reps = std::make_unique<std::vector<std::vector<double>>>();
    for (int s = 0; s < kSensors; ++s) {
      std::vector<double> ell(static_cast<std::size_t>(m) * m, 0.0), g(ell.size());
      for (const auto& [idx, w] : sensor_stencil(s, n)) ell[idx] = w;
      const auto res = kernels::pcg_poisson(exec_, m, ell.data(), g.data(), 1e-13, 10 * m * m);
      if (!res.converged) throw NumericalError("representer solve did not converge");
      reps->push_back(std::move(g));
    }
    slot = std::move(reps);
  }
  return *slot;
}

std::vector<double> PoissonSourceModel2D::sensors_fast(std::span<const double> theta, int mesh_level) const {
  check_theta(theta);
  const int n = cells(mesh_level);
  const int m = n - 1;
  const double h = 1.0 / n;
  const auto& reps = representers(mesh_level);
  std::vector<double> out(kSensors, 0.0);
  std::vector<double> tmp(m);
  for (std::size_t b = 0; b + 1 < theta.size(); b += 2) {
    const auto ex = bump_profile(theta[b], alpha_, n);
    const auto ey = bump_profile(theta[b + 1], alpha_, n);
    for (int s = 0; s < kSensors; ++s) {
      const double* g = reps[s].data();
      double acc = 0.0;
      for (int i = 0; i < m; ++i) {
        const double* row = g + static_cast<std::size_t>(i) * m;
        double r = 0.0;
        for (int j = 0; j < m; ++j) r += row[j] * ey[j];
        acc += ex[i] * r;
      }
      out[s] += amplitude() * h * h * acc;
    }
  }
  ++fast_[mesh_level];
  return out;
}

std::size_t PoissonSourceModel2D::solve_count(int mesh_level) const { return solves_.at(mesh_level).load(); }
std::size_t PoissonSourceModel2D::fast_count(int mesh_level) const { return fast_.at(mesh_level).load(); }

void PoissonSourceModel2D::reset_counters() {
  for (auto& c : solves_) c = 0;
  for (auto& c : fast_) c = 0;
}

ObservationData generate_data(const std::string& model, std::vector<double> theta_true, std::vector<double> clean,
                              double sigma, std::uint64_t seed, int mesh_level) {
  if (sigma < 0.0) throw std::domain_error("noise level must be nonnegative");
  ObservationData d{model, std::move(theta_true), sigma, seed, mesh_level, std::move(clean), {}};
  CounterRng rng = CounterRng(seed).split(0xDA7A);
  d.y = d.clean;
  if (sigma > 0.0)
    for (double& v : d.y) v += sigma * rng.normal();
  return d;
}

nlohmann::json to_json(const ObservationData& d) {
  return {{"model", d.model}, {"theta_true", d.theta_true}, {"sigma", d.sigma}, {"seed", d.seed},
          {"mesh_level", d.mesh_level}, {"clean", d.clean}, {"y", d.y}};
}

ObservationData observation_data_from_json(const nlohmann::json& j) {
  ObservationData d;
  d.model = j.at("model").get<std::string>();
  d.theta_true = j.at("theta_true").get<std::vector<double>>();
  d.sigma = j.at("sigma").get<double>();
  d.seed = j.at("seed").get<std::uint64_t>();
  d.mesh_level = j.at("mesh_level").get<int>();
  d.clean = j.at("clean").get<std::vector<double>>();
  d.y = j.at("y").get<std::vector<double>>();
  return d;
}

}  // namespace mlleja

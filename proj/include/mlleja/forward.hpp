#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlleja/kernels.hpp"

namespace mlleja {

// 1D boundary-value toy with a closed-form solution, observed at 0.1..0.9.
class AnalyticSineModel {
 public:
  static constexpr int kObservations = 9;
  std::vector<double> operator()(std::span<const double> theta) const;
  static double observation_point(int j) { return 0.1 * (j + 1); }
};

// -Laplace(u) = f on the unit square, u = 0 on the boundary, with f a sum of
// Gaussian bumps of width alpha centred at (theta_1, theta_2) and, for a
// 4-vector theta, also at (theta_3, theta_4). Observed at (0.2i, 0.2j).
class PoissonSourceModel2D {
 public:
  static constexpr int kSensors = 16;
  static constexpr int kMaxMeshLevel = 12;

  explicit PoissonSourceModel2D(double alpha, kernels::Exec exec = kernels::Exec::Parallel);

  double alpha() const { return alpha_; }
  double amplitude() const;
  // Cells per side on mesh level p (spacing 2^-p).
  static int cells(int mesh_level);
  static std::array<double, 2> sensor_location(int s);

  // Interior nodal values ((n-1)^2, row-major in x then y) from a PCG solve.
  std::vector<double> solve_field(std::span<const double> theta, int mesh_level) const;
  // Sensor values from a direct PCG solve (counted).
  std::vector<double> sensors(std::span<const double> theta, int mesh_level) const;
  // Sensor values from precomputed sensor representers (adjoint solutions);
  // agrees with sensors() up to the solver tolerance and is much cheaper.
  std::vector<double> sensors_fast(std::span<const double> theta, int mesh_level) const;

  std::size_t solve_count(int mesh_level) const;
  std::size_t fast_count(int mesh_level) const;
  void reset_counters();

  void set_tolerance(double rel_tol) { rel_tol_ = rel_tol; }

 private:
  std::vector<double> rhs(std::span<const double> theta, int mesh_level) const;
  const std::vector<std::vector<double>>& representers(int mesh_level) const;

  double alpha_;
  kernels::Exec exec_;
  double rel_tol_ = 1e-10;
  mutable std::array<std::atomic<std::size_t>, kMaxMeshLevel + 1> solves_{};
  mutable std::array<std::atomic<std::size_t>, kMaxMeshLevel + 1> fast_{};
  mutable std::mutex repr_mutex_;
  mutable std::map<int, std::unique_ptr<std::vector<std::vector<double>>>> repr_;
};

// Bilinear read-off of the 16 sensors from interior nodal values.
std::vector<double> read_sensors(std::span<const double> interior, int cells);

struct ObservationData {
  std::string model;
  std::vector<double> theta_true;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int mesh_level = 0;
  std::vector<double> clean;
  std::vector<double> y;
};

// y = clean + sigma * z with z from the seeded counter-based generator.
ObservationData generate_data(const std::string& model, std::vector<double> theta_true, std::vector<double> clean,
                              double sigma, std::uint64_t seed, int mesh_level);

nlohmann::json to_json(const ObservationData& d);
ObservationData observation_data_from_json(const nlohmann::json& j);

}  // namespace mlleja

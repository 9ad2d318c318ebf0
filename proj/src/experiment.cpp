#include "mlleja/experiment.hpp"

#include <openssl/evp.h>
#include <omp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "mlleja/error.hpp"
#include "mlleja/forward.hpp"
#include "mlleja/mcmc.hpp"
#include "mlleja/univariate.hpp"

namespace mlleja {

using nlohmann::json;

namespace {

template <class E, std::size_t N>
std::string enum_name(E v, const std::array<std::pair<E, const char*>, N>& names) {
  for (const auto& [e, s] : names)
    if (e == v) return s;
  throw std::domain_error("unknown enum value");
}

template <class E, std::size_t N>
E enum_value(const std::string& s, const std::array<std::pair<E, const char*>, N>& names, const char* what) {
  for (const auto& [e, n] : names)
    if (s == n) return e;
  std::string allowed;
  for (const auto& [e, n] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown " + std::string(what) + " '" + s + "' (expected one of: " + allowed + ")");
}

constexpr std::array<std::pair<TestCase, const char*>, 3> kTestCases{
    {{TestCase::TC1_Sine, "TC1_Sine"}, {TestCase::TC2_OneSource, "TC2_OneSource"}, {TestCase::TC3_TwoSource, "TC3_TwoSource"}}};
constexpr std::array<std::pair<Method, const char*>, 6> kMethods{{{Method::MH, "MH"},
                                                                  {Method::StdML, "StdML"},
                                                                  {Method::MLLejaStd, "MLLejaStd"},
                                                                  {Method::MLLejaDV, "MLLejaDV"},
                                                                  {Method::PriorQuad, "PriorQuad"},
                                                                  {Method::PosteriorQuad, "PosteriorQuad"}}};
constexpr std::array<std::pair<QoiKind, const char*>, 2> kQois{
    {{QoiKind::PosteriorMean, "PosteriorMean"}, {QoiKind::ExpNegSum, "ExpNegSum"}}};
constexpr std::array<std::pair<ForwardSolver, const char*>, 2> kSolvers{
    {{ForwardSolver::Representer, "representer"}, {ForwardSolver::PCG, "pcg"}}};

bool is_multilevel(Method m) { return m == Method::StdML || m == Method::MLLejaStd || m == Method::MLLejaDV; }

std::vector<LevelSettings> level_table(TestCase tc) {
  switch (tc) {
    case TestCase::TC2_OneSource:
      return {{4, 1e-5, {1e-7, 1e-7}, 1e-12}, {5, 1e-4, {1e-6, 1e-6}, 1e-11}, {6, 1e-3, {1e-5, 1e-5}, 1e-10}};
    case TestCase::TC3_TwoSource:
      return {{5, 1e-6, {1e-8, 1e-8}, 1e-13}, {6, 1e-5, {1e-7, 1e-7}, 1e-12}, {7, 1e-4, {1e-6, 1e-6}, 1e-11}};
    default:
      return {};
  }
}

std::vector<std::vector<double>> scaled_identity(int d, double s) {
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (int i = 0; i < d; ++i) c[i][i] = s;
  return c;
}

// Strict JSON reading with key paths in diagnostics.
struct Node {
  const json& j;
  std::string path;

  Node at(const std::string& key) const { return {j.at(key), path + "." + key}; }
  Node at(std::size_t i) const { return {j.at(i), path + "[" + std::to_string(i) + "]"}; }
  bool has(const char* key) const { return j.contains(key); }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path + ": " + msg); }

  void object(std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail("expected an object");
    for (const auto& [k, v] : j.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail("unknown key '" + k + "'");
    }
  }
  double number() const {
    if (!j.is_number()) fail("expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("expected a positive number");
    return v;
  }
  long long integer() const {
    if (!j.is_number_integer()) fail("expected an integer");
    return j.get<long long>();
  }
  std::uint64_t unsigned_integer() const {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) fail("expected a non-negative integer");
    return j.get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j.is_boolean()) fail("expected true or false");
    return j.get<bool>();
  }
  std::string string() const {
    if (!j.is_string()) fail("expected a string");
    return j.get<std::string>();
  }
  std::vector<double> numbers() const {
    if (!j.is_array()) fail("expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(at(i).number());
    return out;
  }
  template <class F>
  auto with_context(F&& f) const {
    try {
      return f();
    } catch (const ConfigError& e) {
      fail(e.what());
    }
  }
};

std::vector<std::vector<double>> read_cov(const Node& n, int d) {
  if (n.j.is_number()) return scaled_identity(d, n.positive());
  if (!n.j.is_array()) n.fail("expected a number, a diagonal or a matrix");
  if (n.j.size() > 0 && n.j[0].is_array()) {
    std::vector<std::vector<double>> c;
    for (std::size_t i = 0; i < n.j.size(); ++i) c.push_back(n.at(i).numbers());
    return c;
  }
  const auto diag = n.numbers();
  auto c = scaled_identity(static_cast<int>(diag.size()), 0.0);
  for (std::size_t i = 0; i < diag.size(); ++i) c[i][i] = diag[i];
  return c;
}

int level_int(const Node& n) {
  const long long v = n.integer();
  if (v < 0 || v > 64) n.fail("out of range");
  return static_cast<int>(v);
}

Qoi make_qoi(QoiKind k) {
  if (k == QoiKind::ExpNegSum)
    return [](std::span<const double> t) {
      double s = 0.0;
      for (double x : t) s += x;
      return std::vector<double>{std::exp(-s)};
    };
  return [](std::span<const double> t) { return std::vector<double>(t.begin(), t.end()); };
}

int qoi_dim(QoiKind k, int d) { return k == QoiKind::ExpNegSum ? 1 : d; }

json eigen_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

json eigen_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_json(const std::filesystem::path& p, const json& j) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << j.dump(2) << "\n";
}

json read_json(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("cannot open " + p.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": malformed JSON: " + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string to_string(TestCase t) { return enum_name(t, kTestCases); }
std::string to_string(Method m) { return enum_name(m, kMethods); }
std::string to_string(QoiKind q) { return enum_name(q, kQois); }
std::string to_string(ForwardSolver s) { return enum_name(s, kSolvers); }
TestCase test_case_from_string(const std::string& s) { return enum_value(s, kTestCases, "test case"); }
Method method_from_string(const std::string& s) { return enum_value(s, kMethods, "method"); }
QoiKind qoi_kind_from_string(const std::string& s) { return enum_value(s, kQois, "qoi"); }
ForwardSolver forward_solver_from_string(const std::string& s) { return enum_value(s, kSolvers, "forward solver"); }

MultilevelConfig ExperimentConfig::multilevel() const {
  MultilevelConfig m;
  m.levels = levels;
  m.k_max_interp = k_max_interp;
  m.k_max_quad = k_max_quad;
  m.k_max_interp_gauss = k_max_interp_gauss;
  m.k_max_quad_gauss = k_max_quad_gauss;
  if (method == Method::MLLejaDV) m.variant = Variant::MLLejaDV;
  else if (method == Method::StdML) m.variant = Variant::StdML;
  else m.variant = Variant::MLLejaStd;
  return m;
}

void ExperimentConfig::validate() const {
  const int d = param_dim();
  const bool poisson = test_case != TestCase::TC1_Sine;
  if (!poisson && is_multilevel(method))
    throw ConfigError("method: " + to_string(method) + " needs a mesh hierarchy; TC1_Sine supports MH, PriorQuad, PosteriorQuad");

  const std::size_t data_dim = test_case == TestCase::TC3_TwoSource ? 4 : 2;
  if (data.theta_true.size() != data_dim)
    throw ConfigError("data.theta_true: expected " + std::to_string(data_dim) + " entries");
  if (!(data.sigma > 0.0)) throw ConfigError("data.sigma: must be positive");
  if (poisson && (data.mesh_level < 2 || data.mesh_level > PoissonSourceModel2D::kMaxMeshLevel))
    throw ConfigError("data.mesh_level: must lie in [2, " + std::to_string(PoissonSourceModel2D::kMaxMeshLevel) + "]");
  if (!(model.alpha > 0.0)) throw ConfigError("model.alpha: must be positive");

  auto check_mesh = [&](int mesh, const std::string& key) {
    if (!poisson) return;
    if (mesh < 2) throw ConfigError(key + ": mesh level must be >= 2");
    if (mesh >= data.mesh_level) throw ConfigError(key + ": inversion mesh must be coarser than the data mesh");
  };

  if (is_multilevel(method)) {
    if (levels.size() < 2) throw ConfigError("multilevel.levels: at least two levels are required");
    for (std::size_t j = 0; j < levels.size(); ++j)
      check_mesh(levels[j].mesh_level, "multilevel.levels[" + std::to_string(j) + "].mesh_level");
    try {
      multilevel().validate(d);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("multilevel: ") + e.what());
    }
  }
  if (method == Method::MH) {
    if (mh.n_samples == 0) throw ConfigError("mh.n_samples: must be positive");
    if (static_cast<int>(mh.theta0.size()) != d) throw ConfigError("mh.theta0: expected 2 entries");
    if (!(mh.burn_in >= 0.0 && mh.burn_in < 1.0)) throw ConfigError("mh.burn_in: must lie in [0, 1)");
    if (static_cast<int>(mh.proposal_cov.size()) != d) throw ConfigError("mh.proposal_cov: expected a 2x2 matrix");
    Eigen::MatrixXd c(d, d);
    for (int i = 0; i < d; ++i) {
      if (static_cast<int>(mh.proposal_cov[i].size()) != d) throw ConfigError("mh.proposal_cov: expected a 2x2 matrix");
      for (int k = 0; k < d; ++k) c(i, k) = mh.proposal_cov[i][k];
    }
    if ((c - c.transpose()).norm() > 1e-14 * c.norm() || Eigen::LLT<Eigen::MatrixXd>(c).info() != Eigen::Success)
      throw ConfigError("mh.proposal_cov: must be symmetric positive definite");
    check_mesh(mh.mesh_level, "mh.mesh_level");
  }
  if (method == Method::PriorQuad || method == Method::PosteriorQuad) {
    if (!(quad.prior_tol > 0.0) || !(quad.posterior_tol > 0.0)) throw ConfigError("quadrature: tolerances must be positive");
    if (quad.k_max_prior < 1 || quad.k_max_posterior < 1) throw ConfigError("quadrature: k_max must be >= 1");
    check_mesh(quad.mesh_level, "quadrature.mesh_level");
  }
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

ExperimentConfig default_config(TestCase tc, Method m) {
  ExperimentConfig c;
  c.test_case = tc;
  c.method = m;
  c.mh.theta0 = {1.0, 1.0};
  c.mh.burn_in = 0.1;
  switch (tc) {
    case TestCase::TC1_Sine:
      c.qoi = QoiKind::ExpNegSum;
      c.data = {{0.45, 0.65}, 0.1, 387, 0};
      c.mh.n_samples = 300000;
      c.mh.proposal_cov = scaled_identity(2, 7e-3);
      c.output_dir = "runs/tc1_" + to_string(m);
      break;
    case TestCase::TC2_OneSource:
      c.qoi = QoiKind::PosteriorMean;
      c.data = {{0.35, 0.65}, 0.2, 1895, 7};
      c.model.alpha = 0.2;
      c.levels = level_table(tc);
      c.mh.n_samples = 200000;
      c.mh.proposal_cov = scaled_identity(2, 4e-3);
      c.mh.mesh_level = 6;
      c.quad.mesh_level = 6;
      c.output_dir = "runs/tc2_" + to_string(m);
      break;
    case TestCase::TC3_TwoSource:
      c.qoi = QoiKind::PosteriorMean;
      c.data = {{0.15, 0.15, 0.85, 0.85}, 1.0, 982, 8};
      c.model.alpha = 0.15;
      c.levels = level_table(tc);
      c.mh.n_samples = 200000;
      c.mh.proposal_cov = scaled_identity(2, 0.1);
      c.mh.mesh_level = 7;
      c.quad.mesh_level = 7;
      c.output_dir = "runs/tc3_" + to_string(m);
      break;
  }
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  const Node root{j, "$"};
  root.object({"test_case", "method", "qoi", "data", "model", "multilevel", "mh", "quadrature", "output_dir"});
  if (!root.has("test_case")) root.fail("missing required key 'test_case'");
  if (!root.has("method")) root.fail("missing required key 'method'");
  const TestCase tc = root.at("test_case").with_context([&] { return test_case_from_string(root.at("test_case").string()); });
  const Method m = root.at("method").with_context([&] { return method_from_string(root.at("method").string()); });
  ExperimentConfig c = default_config(tc, m);

  if (root.has("qoi")) {
    const Node n = root.at("qoi");
    c.qoi = n.with_context([&] { return qoi_kind_from_string(n.string()); });
  }
  if (root.has("output_dir")) c.output_dir = root.at("output_dir").string();

  if (root.has("data")) {
    const Node n = root.at("data");
    n.object({"theta_true", "sigma", "seed", "mesh_level"});
    if (n.has("theta_true")) c.data.theta_true = n.at("theta_true").numbers();
    if (n.has("sigma")) c.data.sigma = n.at("sigma").positive();
    if (n.has("seed")) c.data.seed = n.at("seed").unsigned_integer();
    if (n.has("mesh_level")) c.data.mesh_level = level_int(n.at("mesh_level"));
  }
  if (root.has("model")) {
    const Node n = root.at("model");
    n.object({"alpha", "forward_solver"});
    if (n.has("alpha")) c.model.alpha = n.at("alpha").positive();
    if (n.has("forward_solver")) {
      const Node s = n.at("forward_solver");
      c.model.solver = s.with_context([&] { return forward_solver_from_string(s.string()); });
    }
  }
  if (root.has("multilevel")) {
    const Node n = root.at("multilevel");
    n.object({"levels", "k_max_interp", "k_max_quad", "k_max_interp_gauss", "k_max_quad_gauss"});
    if (n.has("levels")) {
      const Node lv = n.at("levels");
      if (!lv.j.is_array()) lv.fail("expected an array of level rows");
      const auto table = level_table(tc);
      c.levels.clear();
      for (std::size_t i = 0; i < lv.j.size(); ++i) {
        const Node row = lv.at(i);
        row.object({"mesh_level", "tol_in", "tau_in", "tol_qu"});
        if (!row.has("mesh_level")) row.fail("missing required key 'mesh_level'");
        const bool complete = row.has("tol_in") && row.has("tol_qu") && (row.has("tau_in") || m != Method::MLLejaDV);
        if (!complete && i >= table.size()) row.fail("no default tolerances for this level; give tol_in, tol_qu and tau_in");
        LevelSettings s = i < table.size() ? table[i] : LevelSettings{};
        s.mesh_level = level_int(row.at("mesh_level"));
        if (row.has("tol_in")) s.tol_in = row.at("tol_in").positive();
        if (row.has("tol_qu")) s.tol_qu = row.at("tol_qu").positive();
        if (row.has("tau_in")) s.tau_in = row.at("tau_in").numbers();
        c.levels.push_back(s);
      }
    }
    auto kmax = [&](const char* key, int& dst) {
      if (!n.has(key)) return;
      const long long v = n.at(key).integer();
      if (v < 1 || v > kMaxOrdinal) n.at(key).fail("out of range");
      dst = static_cast<int>(v);
    };
    kmax("k_max_interp", c.k_max_interp);
    kmax("k_max_quad", c.k_max_quad);
    kmax("k_max_interp_gauss", c.k_max_interp_gauss);
    kmax("k_max_quad_gauss", c.k_max_quad_gauss);
  }
  if (root.has("mh")) {
    const Node n = root.at("mh");
    n.object({"n_samples", "proposal_cov", "theta0", "burn_in", "mesh_level", "write_chain"});
    if (n.has("n_samples")) c.mh.n_samples = n.at("n_samples").unsigned_integer();
    if (n.has("proposal_cov")) c.mh.proposal_cov = read_cov(n.at("proposal_cov"), c.param_dim());
    if (n.has("theta0")) c.mh.theta0 = n.at("theta0").numbers();
    if (n.has("burn_in")) c.mh.burn_in = n.at("burn_in").number();
    if (n.has("mesh_level")) c.mh.mesh_level = level_int(n.at("mesh_level"));
    if (n.has("write_chain")) c.mh.write_chain = n.at("write_chain").boolean();
  }
  if (root.has("quadrature")) {
    const Node n = root.at("quadrature");
    n.object({"prior_tol", "posterior_tol", "k_max_prior", "k_max_posterior", "mesh_level"});
    if (n.has("prior_tol")) c.quad.prior_tol = n.at("prior_tol").positive();
    if (n.has("posterior_tol")) c.quad.posterior_tol = n.at("posterior_tol").positive();
    if (n.has("k_max_prior")) c.quad.k_max_prior = static_cast<int>(n.at("k_max_prior").integer());
    if (n.has("k_max_posterior")) c.quad.k_max_posterior = static_cast<int>(n.at("k_max_posterior").integer());
    if (n.has("mesh_level")) c.quad.mesh_level = level_int(n.at("mesh_level"));
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json levels = json::array();
  for (const auto& l : c.levels)
    levels.push_back({{"mesh_level", l.mesh_level}, {"tol_in", l.tol_in}, {"tau_in", l.tau_in}, {"tol_qu", l.tol_qu}});
  return {{"test_case", to_string(c.test_case)},
          {"method", to_string(c.method)},
          {"qoi", to_string(c.qoi)},
          {"data",
           {{"theta_true", c.data.theta_true},
            {"sigma", c.data.sigma},
            {"seed", c.data.seed},
            {"mesh_level", c.data.mesh_level}}},
          {"model", {{"alpha", c.model.alpha}, {"forward_solver", to_string(c.model.solver)}}},
          {"multilevel",
           {{"levels", levels},
            {"k_max_interp", c.k_max_interp},
            {"k_max_quad", c.k_max_quad},
            {"k_max_interp_gauss", c.k_max_interp_gauss},
            {"k_max_quad_gauss", c.k_max_quad_gauss}}},
          {"mh",
           {{"n_samples", c.mh.n_samples},
            {"proposal_cov", c.mh.proposal_cov},
            {"theta0", c.mh.theta0},
            {"burn_in", c.mh.burn_in},
            {"mesh_level", c.mh.mesh_level},
            {"write_chain", c.mh.write_chain}}},
          {"quadrature",
           {{"prior_tol", c.quad.prior_tol},
            {"posterior_tol", c.quad.posterior_tol},
            {"k_max_prior", c.quad.k_max_prior},
            {"k_max_posterior", c.quad.k_max_posterior},
            {"mesh_level", c.quad.mesh_level}}},
          {"output_dir", c.output_dir}};
}

ExperimentConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

void save_config(const ExperimentConfig& c, const std::filesystem::path& path) { write_json(path, to_json(c)); }

std::string git_blob_hash(const std::string& bytes) {
  const std::string blob = "blob " + std::to_string(bytes.size()) + std::string(1, '\0') + bytes;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) throw std::runtime_error("SHA-1 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

json config_hashes(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  json out = {{"config", git_blob_hash(j.dump())}};
  for (const char* section : {"data", "model", "multilevel", "mh", "quadrature"})
    out[section] = git_blob_hash(j.at(section).dump());
  return out;
}

namespace {

struct Problem {
  std::unique_ptr<PoissonSourceModel2D> poisson;
  std::shared_ptr<std::atomic<std::size_t>> sine_evals = std::make_shared<std::atomic<std::size_t>>(0);
  std::unique_ptr<BayesProblem> bayes;

  json forward_counts() const {
    json j = json::object();
    if (!poisson) {
      j["analytic"] = sine_evals->load();
      return j;
    }
    for (int l = 0; l <= PoissonSourceModel2D::kMaxMeshLevel; ++l) {
      const std::size_t n = poisson->solve_count(l) + poisson->fast_count(l);
      if (n > 0) j[std::to_string(l)] = n;
    }
    return j;
  }
};

ObservationData make_data(const ExperimentConfig& c) {
  if (c.test_case == TestCase::TC1_Sine) {
    const auto clean = AnalyticSineModel{}(c.data.theta_true);
    return generate_data("sine", c.data.theta_true, clean, c.data.sigma, c.data.seed, 0);
  }
  PoissonSourceModel2D fine(c.model.alpha);
  const auto clean = fine.sensors(c.data.theta_true, c.data.mesh_level);
  return generate_data("poisson", c.data.theta_true, clean, c.data.sigma, c.data.seed, c.data.mesh_level);
}

Problem make_problem(const ExperimentConfig& c, const ObservationData& data) {
  Problem p;
  const std::vector<WeightKind> prior(c.param_dim(), WeightKind::UniformUnit);
  ForwardModel f;
  if (c.test_case == TestCase::TC1_Sine) {
    auto counter = p.sine_evals;
    f = [counter](std::span<const double> t, int) {
      ++*counter;
      return AnalyticSineModel{}(t);
    };
  } else {
    p.poisson = std::make_unique<PoissonSourceModel2D>(c.model.alpha);
    PoissonSourceModel2D* m = p.poisson.get();
    if (c.model.solver == ForwardSolver::Representer)
      f = [m](std::span<const double> t, int lev) { return m->sensors_fast(t, lev); };
    else
      f = [m](std::span<const double> t, int lev) { return m->sensors(t, lev); };
  }
  p.bayes = std::make_unique<BayesProblem>(BayesProblem::with_iid_noise(f, data.y, data.sigma, prior));
  return p;
}

bool same_data_settings(const ObservationData& d, const ExperimentConfig& c) {
  const std::string model = c.test_case == TestCase::TC1_Sine ? "sine" : "poisson";
  return d.model == model && d.theta_true == c.data.theta_true && d.sigma == c.data.sigma && d.seed == c.data.seed &&
         d.mesh_level == c.data.mesh_level;
}

json level_summary(int mesh, std::size_t evals, double evidence, const std::vector<double>& qoi, double wall) {
  return {{"level", 1}, {"mesh", mesh}, {"forward_evals", evals}, {"evidence", evidence}, {"qoi", qoi}, {"wall_time_s", wall}};
}

}  // namespace

RunReport run_experiment(ExperimentConfig config, const RunOptions& options) {
  if (options.seed) config.data.seed = *options.seed;
  if (options.out_dir) config.output_dir = options.out_dir->string();
  if (options.threads) {
    if (*options.threads < 1) throw ConfigError("--threads: must be >= 1");
    omp_set_num_threads(*options.threads);
  }
  config.validate();

  RunReport report;
  report.out_dir = config.output_dir;
  std::filesystem::create_directories(report.out_dir);
  save_config(config, report.out_dir / "config.json");

  const auto data_path = report.out_dir / "data.json";
  ObservationData data;
  bool reused = false;
  if (options.resume && std::filesystem::exists(data_path)) {
    try {
      data = observation_data_from_json(read_json(data_path));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(data_path.string() + ": " + e.what());
    }
    if (!same_data_settings(data, config))
      throw ConfigError(data_path.string() + ": cached data do not match the data settings of the config");
    reused = true;
  } else {
    data = make_data(config);
    write_json(data_path, to_json(data));
  }

  Problem prob = make_problem(config, data);
  const BayesProblem& problem = *prob.bayes;

  std::ofstream trace_os(report.out_dir / "trace.jsonl");
  std::mutex trace_mutex;
  TraceSink trace = [&](const json& rec) {
    std::lock_guard lock(trace_mutex);
    trace_os << rec.dump() << "\n";
  };

  const Qoi g = make_qoi(config.qoi);
  const int qd = qoi_dim(config.qoi, config.param_dim());

  json result = {{"version", kVersion},
                 {"config_hash", config_hashes(config)},
                 {"test_case", to_string(config.test_case)},
                 {"method", to_string(config.method)},
                 {"qoi_kind", to_string(config.qoi)},
                 {"data_seed", config.data.seed},
                 {"data_reused", reused}};
  json levels = json::array();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (config.method) {
      case Method::MH: {
        MHConfig mc;
        mc.n_samples = config.mh.n_samples;
        mc.proposal_cov.resize(2, 2);
        for (int i = 0; i < 2; ++i)
          for (int k = 0; k < 2; ++k) mc.proposal_cov(i, k) = config.mh.proposal_cov[i][k];
        mc.theta0 = config.mh.theta0;
        mc.seed = config.data.seed;
        mc.burn_in = config.mh.burn_in;
        const MHResult chain = run_mh(problem, config.mh.mesh_level, mc);
        const QoIEstimate est = estimate_qoi(chain, g);
        const std::size_t decile = std::max<std::size_t>(1, chain.size() / 10);
        for (std::size_t s = 0; s < chain.size(); s += decile) {
          const std::size_t e = std::min(chain.size(), s + decile);
          std::size_t acc = 0;
          for (std::size_t i = s; i < e; ++i) acc += chain.accepted[i] ? 1 : 0;
          trace({{"phase", "mh"}, {"first_iteration", chain.first_iteration + s}, {"iterations", e - s},
                 {"acceptance", static_cast<double>(acc) / static_cast<double>(e - s)}});
        }
        if (config.mh.write_chain) {
          std::ofstream os(report.out_dir / "chain.csv");
          write_chain_csv(os, chain);
        }
        result["qoi"] = est.mean;
        result["qoi_std_error"] = est.std_error;
        result["acceptance_rate"] = chain.acceptance_rate;
        result["n_samples"] = config.mh.n_samples;
        result["n_kept"] = chain.size();
        levels.push_back(level_summary(config.mh.mesh_level, config.mh.n_samples, 0.0, est.mean, seconds_since(t0)));
        break;
      }
      case Method::PriorQuad: {
        const auto r = prior_weighted_quadrature(problem, config.quad.mesh_level, g, qd, config.quad.prior_tol,
                                                 config.quad.k_max_prior, trace);
        result["qoi"] = r.qoi;
        result["quad_nodes"] = r.nodes;
        result["evidence"] = r.evidence;
        levels.push_back(level_summary(config.quad.mesh_level, r.nodes, r.evidence, r.qoi, seconds_since(t0)));
        break;
      }
      case Method::PosteriorQuad: {
        const auto r = posterior_weighted_quadrature(problem, config.quad.mesh_level, g, qd, config.quad.prior_tol,
                                                     config.quad.posterior_tol, config.quad.k_max_prior,
                                                     config.quad.k_max_posterior, trace);
        result["qoi"] = r.qoi;
        result["quad_nodes"] = r.nodes;
        result["setup_nodes"] = r.setup_nodes;
        result["evidence"] = r.evidence;
        result["gaussian"] = {{"m", eigen_json(r.mean)}, {"C", eigen_json(r.cov)}};
        levels.push_back(level_summary(config.quad.mesh_level, r.nodes, r.evidence, r.qoi, seconds_since(t0)));
        break;
      }
      case Method::StdML: {
        const auto r = run_stdml(problem, config.multilevel(), g, qd, trace);
        result["qoi"] = r.qoi;
        result["per_level_qoi"] = r.per_level;
        result["ledger"] = to_json(r.ledger);
        levels = result["ledger"]["levels"];
        break;
      }
      case Method::MLLejaStd:
      case Method::MLLejaDV: {
        const auto r = run_multilevel(problem, config.multilevel(), g, qd, trace);
        result["qoi"] = r.qoi;
        result["ledger"] = to_json(r.ledger);
        result["gaussian"] = {{"m", eigen_json(r.posterior->mean)}, {"C", eigen_json(r.posterior->cov)}};
        levels = result["ledger"]["levels"];
        break;
      }
    }
    result["status"] = "ok";
  } catch (const NumericalError& e) {
    result["status"] = "numerical_failure";
    result["error"] = e.what();
    report.exit_code = 2;
  } catch (const ModelEvaluationError& e) {
    result["status"] = "numerical_failure";
    result["error"] = e.what();
    report.exit_code = 2;
  }
  result["wall_time_s"] = seconds_since(t0);
  result["forward_evaluations"] = prob.forward_counts();
  result["bias_ratio_cap_events"] = bias_ratio_cap_events();
  write_json(report.out_dir / "levels.json", levels);
  write_json(report.out_dir / "result.json", result);
  report.result = result;
  return report;
}

json compare_results(const json& a, const json& b) {
  auto qoi = [](const json& r) { return r.contains("qoi") ? r.at("qoi").get<std::vector<double>>() : std::vector<double>{}; };
  const auto qa = qoi(a), qb = qoi(b);
  json out = {{"a", {{"method", a.value("method", "?")}, {"qoi", qa}, {"status", a.value("status", "?")}}},
              {"b", {{"method", b.value("method", "?")}, {"qoi", qb}, {"status", b.value("status", "?")}}}};
  if (qa.size() == qb.size() && !qa.empty()) {
    std::vector<double> delta(qa.size());
    for (std::size_t i = 0; i < qa.size(); ++i) delta[i] = qa[i] - qb[i];
    out["qoi_delta"] = delta;
  }
  auto ratio = [](double x, double y) -> json { return y > 0.0 ? json(x / y) : json(nullptr); };
  if (a.contains("ledger") && b.contains("ledger")) {
    const auto& la = a.at("ledger").at("levels");
    const auto& lb = b.at("ledger").at("levels");
    json rows = json::array();
    for (std::size_t j = 0; j < std::min(la.size(), lb.size()); ++j) {
      const double ia = la[j].at("interp_evals").get<double>(), ib = lb[j].at("interp_evals").get<double>();
      const double qa_ = la[j].at("quad_evals").get<double>(), qb_ = lb[j].at("quad_evals").get<double>();
      rows.push_back({{"level", j + 1}, {"mesh", la[j].at("mesh")}, {"interp_a", ia}, {"interp_b", ib},
                      {"interp_ratio", ratio(ia, ib)}, {"quad_a", qa_}, {"quad_b", qb_}, {"quad_ratio", ratio(qa_, qb_)}});
    }
    out["levels"] = rows;
    if (!rows.empty()) out["finest_interp_ratio"] = rows.back().at("interp_ratio");
  }
  auto total = [](const json& r) {
    double s = 0.0;
    if (r.contains("forward_evaluations"))
      for (const auto& [k, v] : r.at("forward_evaluations").items()) s += v.get<double>();
    return s;
  };
  out["forward_total_a"] = total(a);
  out["forward_total_b"] = total(b);
  out["forward_ratio"] = ratio(total(a), total(b));
  if (a.contains("quad_nodes") && b.contains("quad_nodes"))
    out["quad_node_ratio"] = ratio(a.at("quad_nodes").get<double>(), b.at("quad_nodes").get<double>());
  return out;
}

std::string format_comparison(const json& cmp) {
  std::ostringstream os;
  os << std::setprecision(6);
  auto fmt = [&](const json& v) {
    if (v.is_null()) return std::string("n/a");
    std::ostringstream s;
    s << std::setprecision(4) << v.get<double>();
    return s.str();
  };
  os << "A: " << cmp["a"]["method"].get<std::string>() << " qoi " << cmp["a"]["qoi"].dump() << "\n";
  os << "B: " << cmp["b"]["method"].get<std::string>() << " qoi " << cmp["b"]["qoi"].dump() << "\n";
  if (cmp.contains("qoi_delta")) os << "qoi delta (A-B): " << cmp["qoi_delta"].dump() << "\n";
  if (cmp.contains("levels")) {
    os << "level  mesh  interp A/B          quad A/B\n";
    for (const auto& r : cmp["levels"])
      os << "  " << r["level"].get<int>() << "     " << r["mesh"].get<int>() << "   " << r["interp_a"].get<double>()
         << "/" << r["interp_b"].get<double>() << " = " << fmt(r["interp_ratio"]) << "   " << r["quad_a"].get<double>()
         << "/" << r["quad_b"].get<double>() << " = " << fmt(r["quad_ratio"]) << "\n";
    os << "finest-level interpolation ratio: " << fmt(cmp["finest_interp_ratio"]) << "\n";
  }
  if (cmp.contains("quad_node_ratio")) os << "quadrature node ratio: " << fmt(cmp["quad_node_ratio"]) << "\n";
  os << "forward evaluations A/B: " << cmp["forward_total_a"].get<double>() << "/" << cmp["forward_total_b"].get<double>()
     << " = " << fmt(cmp["forward_ratio"]) << "\n";
  return os.str();
}

std::string leja_dump_csv(WeightKind kind, int count) {
  if (count < 1 || count > kMaxOrdinal + 1) throw ConfigError("--count: must lie in [1, " + std::to_string(kMaxOrdinal + 1) + "]");
  LejaRule1D rule(kind, Growth::Interp, count);
  const auto w = rule.quad_weights_for_count(count);
  std::ostringstream os;
  os << std::setprecision(17) << "index,node,quad_weight\n";
  for (int i = 0; i < count; ++i) os << i << "," << rule.node(i) << "," << w[i] << "\n";
  return os.str();
}

}  // namespace mlleja

#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include <bmech/bqm.hpp>
#include <bmech/classical.hpp>
#include <bmech/quantize.hpp>
#include <bmech/symplectic.hpp>
#include <bmech/sysdsl.hpp>

namespace bmech::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class Level { Error = 0, Info = 1, Debug = 2 };

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {
    const char* env = std::getenv("BMECH_LOG");
    const std::string v = env ? env : "error";
    if (v == "info") level_ = Level::Info;
    if (v == "debug") level_ = Level::Debug;
  }
  void error(const std::string& m) const { err_ << "bmech: error: " << m << "\n"; }
  void info(const std::string& m) const {
    if (level_ >= Level::Info) err_ << "bmech: " << m << "\n";
  }
  void debug(const std::string& m) const {
    if (level_ >= Level::Debug) err_ << "bmech: debug: " << m << "\n";
  }

 private:
  std::ostream& err_;
  Level level_ = Level::Error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

double to_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  try {
    size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("bad number '" + t + "' in " + what);
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (int r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

const char* error_name(const std::exception& e) {
  if (dynamic_cast<const SingularHessian*>(&e)) return "SingularHessian";
  if (dynamic_cast<const NoConvergence*>(&e)) return "NoConvergence";
  if (dynamic_cast<const OffShell*>(&e)) return "OffShell";
  if (dynamic_cast<const Instability*>(&e)) return "Instability";
  if (dynamic_cast<const SingularMetric*>(&e)) return "SingularMetric";
  if (dynamic_cast<const Degenerate*>(&e)) return "Degenerate";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const SpecError*>(&e)) return "SpecError";
  if (dynamic_cast<const NonNaturalLagrangian*>(&e)) return "NonNaturalLagrangian";
  if (dynamic_cast<const WeightMismatch*>(&e)) return "WeightMismatch";
  if (dynamic_cast<const ShapeMismatch*>(&e)) return "ShapeMismatch";
  if (dynamic_cast<const UsageError*>(&e)) return "UsageError";
  return "Error";
}

json config_echo(const RunConfig& c) {
  json j;
  j["subcommand"] = c.subcommand;
  j["spec"] = c.spec_path;
  j["seed"] = c.seed;
  const std::string& s = c.subcommand;
  if (s == "classical" || s == "brackets") {
    j["xi"] = c.xi;
    j["xf"] = c.xf;
    j["ti"] = c.ti;
    j["tf"] = c.tf;
    j["slices"] = c.slices;
    if (!c.scan.empty()) j["scan"] = c.scan;
  }
  if (s == "brackets") {
    j["at"] = c.at;
    j["pairs"] = c.pairs;
  }
  if (s == "quantize-check") {
    j["grid"] = c.grid;
    j["gamma"] = c.gamma;
    j["xi_coupling"] = c.xi_coupling;
  }
  if (s == "propagator" || s == "semiclassical") {
    j["T"] = c.T;
    j["grid"] = c.grid;
    j["method"] = c.method;
    j["slices"] = c.slices;
  }
  if (s == "propagator" && !c.oracle.empty()) {
    j["oracle"] = c.oracle;
    j["mass"] = c.mass;
    j["omega"] = c.omega;
  }
  if (s == "semiclassical") {
    j["classical_slices"] = c.classical_slices;
    j["window"] = {c.window_lo, c.window_hi};
    j["cutoff"] = c.cutoff ? json(*c.cutoff) : json(nullptr);
    j["fields"] = c.fields;
    j["gamma"] = c.gamma;
  }
  if (s == "report") j["inputs"] = c.inputs;
  return j;
}

// ---------------------------------------------------------------------------
// Validation against the spec.

void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

void check_point(const SystemSpec& spec, const std::vector<double>& x, const std::string& flag) {
  require(static_cast<int>(x.size()) == spec.dim,
          flag + " needs " + std::to_string(spec.dim) + " values, got " + std::to_string(x.size()));
  for (int k = 0; k < spec.dim; ++k) {
    const DomainInterval& d = spec.domain[k];
    if (d.periodic) continue;
    require(x[k] >= d.min && x[k] <= d.max, flag + " component " + std::to_string(k + 1) + " = " +
                                                std::to_string(x[k]) + " lies outside [" +
                                                std::to_string(d.min) + ", " + std::to_string(d.max) + "]");
  }
}

void check_times(double ti, double tf, int slices) {
  require(tf > ti, "--tf must exceed --ti");
  require(slices >= 2, "--slices must be at least 2");
}

void check_grid(int M) { require(M >= 3 && M <= 4096, "--grid must lie in [3, 4096]"); }

ChartPoint chart(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

int worker_count(const RunConfig& c) {
  if (c.threads > 0) return c.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Subcommands. Each fills `report`; a numerical failure propagates.

void cmd_parse(const SystemSpec& spec, json& report) {
  report["name"] = spec.name;
  report["dim"] = spec.dim;
  report["lagrangian"] = print(spec.lagrangian);
  if (spec.potential) report["potential"] = print(*spec.potential);
  if (spec.metric) {
    json g = json::array();
    for (const auto& row : *spec.metric) {
      json r = json::array();
      for (const Expr& e : row) r.push_back(print(e));
      g.push_back(r);
    }
    report["metric"] = g;
  }
  json params = json::object();
  for (size_t k = 0; k < spec.parameters.names.size(); ++k)
    params[spec.parameters.names[k]] = spec.parameters.values[k];
  report["parameters"] = params;
  json dom = json::array();
  for (const auto& d : spec.domain) dom.push_back({{"min", d.min}, {"max", d.max}, {"periodic", d.periodic}});
  report["domain"] = dom;
  std::vector<ChartPoint> samples;
  for (int s = 0; s < 5; ++s) {
    ChartPoint x(spec.dim);
    for (int k = 0; k < spec.dim; ++k) {
      const auto& d = spec.domain[k];
      x[k] = d.min + (d.max - d.min) * (0.15 + 0.175 * s + 0.01 * k);
    }
    samples.push_back(x);
  }
  try {
    natural_system(spec, samples);
    report["natural"] = true;
  } catch (const Error& e) {
    report["natural"] = false;
    report["natural_reason"] = e.what();
  }
}

json classical_entry(const SystemSpec& spec, const RunConfig& c, double tf) {
  const TimeGrid grid(c.ti, tf, c.slices);
  const ClassicalSolution sol = solve_classical(spec, chart(c.xf), chart(c.xi), grid);
  const ActionDerivs d = classical_action_derivs(sol);
  const BoundaryGreens g = boundary_greens(d);
  json j;
  j["tf"] = tf;
  j["S_bar"] = d.action;
  j["p_f"] = vec_json(sol.p_f);
  j["p_i"] = vec_json(sol.p_i);
  j["hessian"] = {{"ff", mat_json(d.Hff)}, {"fi", mat_json(d.Hfi)}, {"if", mat_json(d.Hif)}, {"ii", mat_json(d.Hii)}};
  j["greens"] = {{"gFif", mat_json(g.gFif)}, {"gFfi", mat_json(g.gFfi)}, {"gFC", mat_json(g.gFC)}};
  j["convergence"] = {{"converged", sol.converged},
                      {"iterations", sol.iterations},
                      {"residual_norm", sol.residual_norm},
                      {"conditioning", sol.conditioning}};
  return j;
}

void cmd_classical(const SystemSpec& spec, const RunConfig& c, json& report, const Log& log) {
  check_point(spec, c.xi, "--xi");
  check_point(spec, c.xf, "--xf");
  check_times(c.ti, c.tf, c.slices);
  if (c.scan.empty()) {
    report["result"] = classical_entry(spec, c, c.tf);
    return;
  }
  const auto parts = split(c.scan, ':');
  require(parts.size() == 3, "--scan expects a:b:k");
  const double a = to_double(parts[0], "--scan"), b = to_double(parts[1], "--scan");
  const double kd = to_double(parts[2], "--scan");
  require(kd >= 1 && kd == std::floor(kd) && kd <= 10000, "--scan count must be a positive integer");
  const int k = static_cast<int>(kd);
  require(a > c.ti && b > c.ti, "--scan times must exceed --ti");
  json scan = json::array();
  for (int s = 0; s < k; ++s) {
    const double tf = k == 1 ? a : a + (b - a) * s / (k - 1);
    log.debug("scan t_f = " + std::to_string(tf));
    try {
      scan.push_back(classical_entry(spec, c, tf));
    } catch (const NumericalError& e) {
      scan.push_back({{"tf", tf}, {"error", {{"type", error_name(e)}, {"message", e.what()}}}});
    }
  }
  report["scan"] = scan;
}

void cmd_brackets(const SystemSpec& spec, const RunConfig& c, json& report) {
  const int n = spec.dim;
  require(static_cast<int>(c.at.size()) == 2 * n, "--at needs x_f then x_i, " + std::to_string(2 * n) + " values");
  const std::vector<double> xf(c.at.begin(), c.at.begin() + n), xi(c.at.begin() + n, c.at.end());
  check_point(spec, xf, "--at (final)");
  check_point(spec, xi, "--at (initial)");
  check_times(c.ti, c.tf, c.slices);
  require(!trim(c.pairs).empty(), "--pairs is empty");

  const SymbolTable syms = SymbolTable::boundary_phase(n);
  struct Named {
    std::string text;
    Observable obs;
  };
  std::vector<Named> distinct;
  auto observable = [&](const std::string& text) -> const Observable& {
    for (const auto& d : distinct)
      if (d.text == text) return d.obs;
    Expr e = parse_expression(text, syms, spec.parameters);
    distinct.push_back({text, Observable::from_expr(e, spec.parameters.values, n)});
    return distinct.back().obs;
  };
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const std::string& item : split(c.pairs, ';')) {
    if (trim(item).empty()) continue;
    const auto ab = split(item, '|');
    require(ab.size() == 2, "--pairs entry '" + item + "' is not A|B");
    pairs.emplace_back(trim(ab[0]), trim(ab[1]));
    observable(pairs.back().first);
    observable(pairs.back().second);
  }

  const ActionDerivs S = classical_action_derivs(spec, chart(xf), chart(xi), TimeGrid(c.ti, c.tf, c.slices));
  const BoundaryGreens G = boundary_greens(S);
  const BoundaryPhasePoint pt = on_shell_point(S, chart(xf), chart(xi));
  report["point"] = {{"x_f", vec_json(pt.x_f)}, {"p_f", vec_json(pt.p_f)}, {"x_i", vec_json(pt.x_i)},
                     {"p_i", vec_json(pt.p_i)}};
  report["S_bar"] = S.action;
  report["off_shell_violation"] = off_shell_violation(pt, S);

  json table = json::array();
  for (const auto& [a, b] : pairs) {
    const Observable& A = observable(a);
    const Observable& B = observable(b);
    const double bb = poisson_boundary(A, B, pt);
    const double cab = poisson_covariant(A, B, pt, S, G);
    const double cba = poisson_covariant(B, A, pt, S, G);
    table.push_back({{"A", a},
                     {"B", b},
                     {"boundary", bb},
                     {"covariant", cab},
                     {"antisymmetry_residual", std::abs(cab + cba)}});
  }
  report["brackets"] = table;
  if (distinct.size() >= 3) {
    const Observable &A = distinct[0].obs, &B = distinct[1].obs, &C = distinct[2].obs;
    const double jac = poisson_boundary(A, bracket_observable(B, C), pt) +
                       poisson_boundary(B, bracket_observable(C, A), pt) +
                       poisson_boundary(C, bracket_observable(A, B), pt);
    report["jacobi"] = {{"observables", {distinct[0].text, distinct[1].text, distinct[2].text}},
                        {"residual", std::abs(jac)}};
  }
}

// Test field for the commutator: x along open axes, a smooth periodic
// function along periodic ones.
struct AxisProbe {
  std::function<double(double)> f, df;
};

AxisProbe probe(const DomainInterval& d) {
  if (!d.periodic) return {[](double x) { return x; }, [](double) { return 1.0; }};
  const double k = 2 * M_PI / (d.max - d.min);
  return {[=](double x) { return std::sin(k * (x - d.min)); }, [=](double x) { return k * std::cos(k * (x - d.min)); }};
}

cplx gaussian_bump(const SystemSpec& spec, const ChartPoint& x) {
  double r2 = 0.0;
  for (int k = 0; k < spec.dim; ++k) {
    const auto& d = spec.domain[k];
    const double c = 0.5 * (d.min + d.max), s = 0.1 * (d.max - d.min);
    r2 += (x[k] - c) * (x[k] - c) / (s * s);
  }
  return std::exp(-0.5 * r2);
}

Eigen::VectorXcd diag_of(const Grid& grid, const std::function<cplx(const ChartPoint&)>& f) {
  Eigen::VectorXcd v(grid.size());
  for (int j = 0; j < grid.size(); ++j) v[j] = f(grid.point(j));
  return v;
}

void cmd_quantize_check(const SystemSpec& spec, const RunConfig& c, json& report, const Log& log) {
  check_grid(c.grid);
  require(std::isfinite(c.gamma), "--gamma must be finite");
  const int n = spec.dim;
  const Grid grid = Grid::from_domain(spec.domain, c.grid);

  // Ordering relation with a seeded polynomial field.
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ScalarField> comps;
  json coeffs = json::array();
  for (int k = 0; k < n; ++k) {
    const double c0 = u(rng), c1 = u(rng), c2 = u(rng);
    coeffs.push_back({c0, c1, c2});
    const auto& d = spec.domain[k];
    const double mid = 0.5 * (d.min + d.max), half = 0.5 * (d.max - d.min);
    comps.push_back(ScalarField::from_function(n, [=](const ChartPoint& x) {
      const double s = (x[k] - mid) / half;
      return c0 + c1 * s + c2 * s * s;
    }));
  }
  const VectorField a(comps);
  const SparseC G0 = op_G_sparse(a, 0.0, grid), Gg = op_G_sparse(a, c.gamma, grid);
  const Eigen::VectorXd div = discrete_divergence(a, grid);
  SparseC D(grid.size(), grid.size());
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int j = 0; j < grid.size(); ++j) trip.emplace_back(j, j, cplx(c.gamma * div[j], 0.0));
  D.setFromTriplets(trip.begin(), trip.end());
  const SparseC ord = Gg - G0 - D;
  double ord_res = 0.0;
  for (int k = 0; k < ord.outerSize(); ++k)
    for (SparseC::InnerIterator it(ord, k); it; ++it) ord_res = std::max(ord_res, std::abs(it.value()));
  report["ordering"] = {{"field_coefficients", coeffs}, {"max_abs_residual", ord_res}};

  // [F_f, G_d] - i F_{d f} on a Gaussian along each axis at M, 2M, 4M.
  json comm = json::array();
  for (int axis = 0; axis < n; ++axis) {
    const AxisProbe pr = probe(spec.domain[axis]);
    std::vector<double> hs, errs;
    for (int level = 0; level < 3; ++level) {
      const int M = c.grid << level;
      const Grid g = Grid::from_domain(spec.domain, M);
      log.debug("commutator axis " + std::to_string(axis + 1) + " M = " + std::to_string(M));
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[axis] = 1.0;
      const SparseC Ga = op_G_sparse(VectorField::constant(e), c.gamma, g);
      const Eigen::VectorXcd f = diag_of(g, [&](const ChartPoint& x) { return cplx(pr.f(x[axis])); });
      const Eigen::VectorXcd df = diag_of(g, [&](const ChartPoint& x) { return cplx(pr.df(x[axis])); });
      const Eigen::VectorXcd psi = diag_of(g, [&](const ChartPoint& x) { return gaussian_bump(spec, x); });
      const Eigen::VectorXcd Gpsi = Ga * psi;
      const Eigen::VectorXcd fpsi = f.cwiseProduct(psi);
      const Eigen::VectorXcd r = f.cwiseProduct(Gpsi) - Ga * fpsi - cplx(0, 1) * df.cwiseProduct(psi);
      hs.push_back(g.axis(axis).h);
      errs.push_back(r.norm() / psi.norm());
    }
    comm.push_back({{"axis", axis + 1},
                    {"M", {c.grid, 2 * c.grid, 4 * c.grid}},
                    {"residuals", errs},
                    {"fitted_order", fitted_order(hs, errs)}});
  }
  report["commutators"] = comm;

  bool all_periodic = true;
  for (const auto& d : spec.domain) all_periodic = all_periodic && d.periodic;
  if (all_periodic) {
    const SparseC H = G0 - SparseC(G0.adjoint());
    double r = 0.0;
    for (int k = 0; k < H.outerSize(); ++k)
      for (SparseC::InnerIterator it(H, k); it; ++it) r = std::max(r, std::abs(it.value()));
    report["hermiticity"] = {{"gamma", 0.0}, {"max_abs_residual", r}};
  } else {
    report["hermiticity"] = nullptr;
  }

  if (spec.metric) {
    const MetricField g = MetricField::from_exprs(*spec.metric, spec.parameters.values);
    const Eigen::VectorXd R = scalar_curvature_on(g, grid);
    const SparseC K = op_K_sparse(g, c.xi_coupling, grid);
    const SparseC asym = K - SparseC(K.adjoint());
    report["op_K"] = {{"xi", c.xi_coupling},
                      {"curvature_min", R.minCoeff()},
                      {"curvature_max", R.maxCoeff()},
                      {"relative_asymmetry", asym.norm() / std::max(K.norm(), 1e-300)}};
  } else {
    report["op_K"] = nullptr;
  }
}

PropagatorOptions propagator_options(const RunConfig& c) {
  PropagatorOptions o;
  require(c.method == "cn" || c.method == "trotter", "--method must be cn or trotter");
  o.method = c.method == "cn" ? PropagatorMethod::CrankNicolson : PropagatorMethod::Trotter;
  require(c.slices >= 1, "--slices must be positive");
  o.slices = c.slices;
  o.threads = worker_count(c);
  return o;
}

std::string sibling(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  return (p.parent_path() / (p.stem().string() + "." + suffix + ".csv")).string();
}

void write_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << std::setprecision(17);
  for (int r = 0; r < m.rows(); ++r) {
    for (int k = 0; k < m.cols(); ++k) f << (k ? "," : "") << m(r, k);
    f << "\n";
  }
}

void cmd_propagator(const SystemSpec& spec, const RunConfig& c, json& report, std::vector<std::string>& csvs) {
  check_grid(c.grid);
  require(c.T > 0, "--T must be positive");
  const Grid grid = Grid::from_domain(spec.domain, c.grid);
  const KernelMatrix K = phys_state(spec, c.T, grid, propagator_options(c));
  report["norm_drift"] = K.norm_drift;
  report["points"] = grid.size();
  report["cell_volume"] = grid.cell_volume();
  if (!c.oracle.empty()) {
    require(spec.dim == 1, "--oracle needs a one-dimensional system");
    require(c.mass > 0, "--mass must be positive");
    QuadraticKernel q;
    if (c.oracle == "free") {
      q = QuadraticKernel::free(c.mass, c.T);
    } else if (c.oracle == "mehler") {
      require(c.omega > 0 && c.omega * c.T < M_PI, "--oracle mehler needs 0 < omega T < pi");
      q = QuadraticKernel::mehler(c.mass, c.omega, c.T);
    } else {
      throw UsageError("--oracle must be free or mehler");
    }
    const std::vector<GaussianPacket> packets = {{-1.0, 1.0, 0.0}, {0.0, 1.0, 0.0}, {1.0, 1.0, 0.0}};
    report["oracle"] = {{"kind", c.oracle}, {"packet_l2_error", kernel_packet_error(K, q, packets)}};
  }
  if (!c.out_path.empty()) {
    csvs.push_back(sibling(c.out_path, "K_abs"));
    write_csv(csvs.back(), K.K.cwiseAbs());
    csvs.push_back(sibling(c.out_path, "K_arg"));
    write_csv(csvs.back(), K.K.unaryExpr([](cplx z) { return std::arg(z); }).real());
  }
}

std::vector<VectorField> parse_fields(const std::string& text, const SystemSpec& spec) {
  const int m = 2 * spec.dim;
  const SymbolTable syms = SymbolTable::configuration(m);
  std::vector<VectorField> out;
  for (const std::string& f : split(text, ';')) {
    if (trim(f).empty()) continue;
    const auto parts = split(f, ',');
    require(static_cast<int>(parts.size()) == m,
            "field '" + f + "' needs " + std::to_string(m) + " components over x1..x" + std::to_string(m));
    std::vector<ScalarField> comps;
    for (const auto& p : parts)
      comps.push_back(ScalarField::from_expr(parse_expression(trim(p), syms, spec.parameters),
                                             spec.parameters.values, m));
    out.emplace_back(comps);
  }
  require(!out.empty(), "--fields is empty");
  return out;
}

void cmd_semiclassical(const SystemSpec& spec, const RunConfig& c, json& report, std::vector<std::string>& csvs) {
  check_grid(c.grid);
  require(c.T > 0, "--T must be positive");
  require(c.window_hi > c.window_lo, "--window needs lo < hi");
  require(c.classical_slices >= 2, "--classical-slices must be at least 2");
  if (c.cutoff) require(*c.cutoff > 0, "--cutoff must be positive");
  for (const auto& d : spec.domain)
    require(d.periodic || (c.window_lo >= d.min && c.window_hi <= d.max), "--window leaves the domain");
  const std::vector<VectorField> fields = parse_fields(c.fields, spec);
  const Grid grid = Grid::from_domain(spec.domain, c.grid);
  const KernelMatrix K = phys_state(spec, c.T, grid, propagator_options(c));
  SemiclassicalOptions so;
  so.window_lo = c.window_lo;
  so.window_hi = c.window_hi;
  so.cutoff = c.cutoff;
  so.gamma = c.gamma;
  so.threads = worker_count(c);
  const SemiclassicalResult r =
      semiclassical_measure(K, classical_evaluator(spec, c.T, c.classical_slices), fields, so);
  report["norm_drift"] = K.norm_drift;
  report["window_points"] = {r.rows.size(), r.cols.size()};
  report["measure_mean"] = {{"re", r.mean.real()}, {"im", r.mean.imag()}, {"abs", std::abs(r.mean)}};
  report["max_rel_variation"] = r.max_rel_variation;
  report["residuals"] = r.residuals;
  if (!c.out_path.empty()) {
    csvs.push_back(sibling(c.out_path, "K_abs"));
    write_csv(csvs.back(), K.K.cwiseAbs());
    csvs.push_back(sibling(c.out_path, "K_arg"));
    write_csv(csvs.back(), K.K.unaryExpr([](cplx z) { return std::arg(z); }).real());
    csvs.push_back(sibling(c.out_path, "a_abs"));
    write_csv(csvs.back(), r.measure.cwiseAbs());
    csvs.push_back(sibling(c.out_path, "a_arg"));
    write_csv(csvs.back(), r.measure.unaryExpr([](cplx z) { return std::arg(z); }).real());
    for (size_t k = 0; k < r.residual_fields.size(); ++k) {
      csvs.push_back(sibling(c.out_path, "residual" + std::to_string(k + 1)));
      write_csv(csvs.back(), r.residual_fields[k]);
    }
  }
}

void cmd_report(const RunConfig& c, json& report) {
  require(!c.inputs.empty(), "report needs at least one input file");
  json runs = json::array();
  json summary = json::object();
  for (const auto& path : c.inputs) {
    json r;
    try {
      r = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw UsageError("'" + path + "' is not JSON: " + e.what());
    }
    require(r.is_object() && r.contains("tool_version") && r.contains("config_echo"),
            "'" + path + "' is not a bmech report");
    const std::string sub = r["config_echo"].value("subcommand", "");
    summary[sub.empty() ? "unknown" : sub] = summary.value(sub.empty() ? "unknown" : sub, 0) + 1;
    runs.push_back({{"file", path}, {"status", r.value("status", "")}, {"report", r}});
  }
  report["runs"] = runs;
  report["counts"] = summary;
}

}  // namespace

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  if (trim(text).empty()) return v;
  for (const auto& s : split(text, ',')) v.push_back(to_double(s, "'" + text + "'"));
  return v;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Log log(err);
  json report;
  report["tool_version"] = kToolVersion;
  report["config_echo"] = config_echo(config);
  std::vector<std::string> csvs;
  int status = 0;
  auto finish = [&]() {
    if (!csvs.empty()) report["csv"] = csvs;
    const std::string text = report.dump(2) + "\n";
    if (config.out_path.empty()) {
      out << text;
      return;
    }
    std::ofstream f(config.out_path, std::ios::binary);
    if (!f) {
      log.error("cannot write '" + config.out_path + "'");
      status = 1;
      return;
    }
    f << text;
    log.info("wrote " + config.out_path);
  };

  try {
    if (config.subcommand == "report") {
      report["spec_hash"] = nullptr;
      cmd_report(config, report);
    } else {
      require(!config.spec_path.empty(), "--spec is required");
      if (!fs::exists(config.spec_path)) throw UsageError("spec file not found: '" + config.spec_path + "'");
      const std::string text = read_file(config.spec_path);
      report["spec_hash"] = hex64(fnv1a(text));
      const SystemSpec spec = parse_system_spec(text);
      log.info("loaded " + config.spec_path + " (" + spec.name + ")");
      const std::string& s = config.subcommand;
      if (s == "parse") cmd_parse(spec, report);
      else if (s == "classical") cmd_classical(spec, config, report, log);
      else if (s == "brackets") cmd_brackets(spec, config, report);
      else if (s == "quantize-check") cmd_quantize_check(spec, config, report, log);
      else if (s == "propagator") cmd_propagator(spec, config, report, csvs);
      else if (s == "semiclassical") cmd_semiclassical(spec, config, report, csvs);
      else throw UsageError("unknown subcommand '" + s + "'");
    }
    report["status"] = "ok";
  } catch (const NumericalError& e) {
    log.error(std::string(error_name(e)) + ": " + e.what());
    report["status"] = "numerical_failure";
    report["error"] = {{"type", error_name(e)}, {"message", e.what()}};
    status = 2;
    finish();
    return status;
  } catch (const ParseError& e) {
    log.error(format_diagnostic(e));
    return 1;
  } catch (const Error& e) {
    log.error(std::string(error_name(e)) + ": " + e.what());
    return 1;
  }
  finish();
  return status;
}

}  // namespace bmech::cli

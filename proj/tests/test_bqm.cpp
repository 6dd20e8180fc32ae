#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <bmech/bqm.hpp>

#include "test_support.hpp"

using namespace bmech;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};

SystemSpec spec_from(const std::string& name) { return load_system_spec(testsupport::specs_dir() + "/" + name); }

ScalarField field(const std::string& text, int dim) {
  return ScalarField::from_expr(parse_expression(text, SymbolTable::configuration(dim), {}), {}, dim);
}

Eigen::MatrixXcd random_matrix(std::mt19937& rng, int n) {
  std::normal_distribution<double> d(0, 1);
  return Eigen::MatrixXcd::NullaryExpr(n, n, [&] { return cplx(d(rng), d(rng)); });
}

Eigen::VectorXcd row_major_vec(const Eigen::MatrixXcd& W) {
  Eigen::VectorXcd v(W.size());
  for (int r = 0; r < W.rows(); ++r)
    for (int c = 0; c < W.cols(); ++c) v[r * W.cols() + c] = W(r, c);
  return v;
}

const std::vector<GaussianPacket> kPackets = {{-1.0, 1.0, 0.0}, {0.0, 1.0, 0.0}, {1.0, 1.0, 0.0}};

}  // namespace

TEST_CASE("lifted observables from opposite ends commute") {
  std::mt19937 rng(1);
  const Grid g = Grid({Axis::over(0, 1, 5, false)});
  const GridOperator A{g, random_matrix(rng, 5), std::nullopt}, B{g, random_matrix(rng, 5), std::nullopt};
  const BoundaryOperator Af = lift_observable(A, BoundaryEnd::Final), Bi = lift_observable(B, BoundaryEnd::Initial);
  const Eigen::MatrixXcd Pf = Af.product_matrix(g, g), Pi = Bi.product_matrix(g, g);
  CHECK((Pf * Pi - Pi * Pf).cwiseAbs().maxCoeff() == 0.0);

  BoundaryState s{g, g, random_matrix(rng, 5)};
  const BoundaryState ab = Af.apply(Bi.apply(s)), ba = Bi.apply(Af.apply(s));
  CHECK((ab.W - ba.W).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((row_major_vec(Af.apply(s).W) - Pf * row_major_vec(s.W)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((row_major_vec(Bi.apply(s).W) - Pi * row_major_vec(s.W)).cwiseAbs().maxCoeff() < 1e-12);

  const GridOperator one{g, Eigen::MatrixXcd::Identity(5, 5), std::nullopt};
  for (BoundaryEnd e : {BoundaryEnd::Final, BoundaryEnd::Initial}) {
    CHECK(lift_observable(one, e).product_matrix(g, g).isIdentity(0));
    CHECK((lift_observable(one, e).apply(s).W - s.W).cwiseAbs().maxCoeff() == 0.0);
  }
  const Grid g6 = Grid({Axis::over(0, 1, 6, false)});
  CHECK_THROWS_AS(Af.apply(BoundaryState{g6, g, Eigen::MatrixXcd::Zero(6, 5)}), ShapeMismatch);
}

TEST_CASE("final-end lift acts through the conjugate") {
  // Acting on a product state conj(psi_f) psi_i^T, the final operator A
  // appears as conj(A psi_f).
  std::mt19937 rng(2);
  const Grid g = Grid({Axis::over(-1, 1, 6, false)});
  const GridOperator A{g, random_matrix(rng, 6), std::nullopt};
  DensityField f{g, random_matrix(rng, 6).col(0), wave_weight(0)};
  DensityField i{g, random_matrix(rng, 6).col(1), wave_weight(0)};
  const BoundaryState s = BoundaryState::product(f, i);
  CHECK(s.numerical_rank() == 1);
  DensityField Af{g, A.matrix * f.values, wave_weight(0)};
  const BoundaryState expected = BoundaryState::product(Af, i);
  CHECK((lift_observable(A, BoundaryEnd::Final).apply(s).W - expected.W).cwiseAbs().maxCoeff() < 1e-12);
  DensityField Ai{g, A.matrix * i.values, wave_weight(0)};
  CHECK((lift_observable(A, BoundaryEnd::Initial).apply(s).W - BoundaryState::product(f, Ai).W).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("boundary G matches the product-grid construction") {
  const Grid gf({Axis::over(0, 2 * kPi, 6, true)}), gi({Axis::over(-1, 1, 7, false)});
  const Grid prod = Grid::product(gf, gi);
  const VectorField af({field("1 + 0.5*sin(x1)", 1)}), ai({field("x1^2 - 0.3", 1)});
  const VectorField a_prod({field("1 + 0.5*sin(x1)", 2), field("x2^2 - 0.3", 2)});
  for (double gamma : {0.0, 0.35}) {
    const Eigen::MatrixXcd lifted = -lift_observable(op_G(af, gamma, gf), BoundaryEnd::Final).product_matrix(gf, gi) +
                                    lift_observable(op_G(ai, gamma, gi), BoundaryEnd::Initial).product_matrix(gf, gi);
    // The conjugated final factor carries the opposite ordering parameter.
    const VectorField only_f({field("1 + 0.5*sin(x1)", 2), ScalarField::constant(2, 0.0)});
    const VectorField only_i({ScalarField::constant(2, 0.0), field("x2^2 - 0.3", 2)});
    const Eigen::MatrixXcd direct = op_G(only_f, -gamma, prod).matrix + op_G(only_i, gamma, prod).matrix;
    CHECK((lifted - direct).cwiseAbs().maxCoeff() < 1e-12);
    if (gamma == 0.0) CHECK((lifted - op_G(a_prod, 0.0, prod).matrix).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("amplitudes") {
  std::mt19937 rng(3);
  const Grid g = Grid({Axis::over(-2, 2, 9, false)});
  KernelMatrix k;
  k.grid = g;
  k.K = random_matrix(rng, 9);
  for (auto [jf, ji] : {std::pair{0, 0}, std::pair{3, 7}, std::pair{8, 2}})
    CHECK(std::abs(amplitude(k, BoundaryState::position(g, jf, g, ji)) - k.K(jf, ji)) < 1e-12);
  const double c2 = g.cell_volume() * g.cell_volume();
  CHECK(std::abs(amplitude(k, BoundaryState::from_kernel(k)) - c2 * k.K.squaredNorm()) < 1e-10);
  BoundaryState s{g, g, random_matrix(rng, 9)};
  const cplx c(0.3, -1.7);
  BoundaryState cs = s;
  cs.W *= c;
  CHECK(std::abs(amplitude(k, cs) - c * amplitude(k, s)) < 1e-10);
  // Product state amplitude is <psi_f| U |psi_i> with U = K cell.
  DensityField f{g, random_matrix(rng, 9).col(0), wave_weight(0)};
  DensityField i{g, random_matrix(rng, 9).col(0), wave_weight(0)};
  const cplx direct = f.values.dot(k.evolution() * i.values) * g.cell_volume();
  CHECK(std::abs(amplitude(k, BoundaryState::product(f, i)) - direct) < 1e-10);
  CHECK_THROWS_AS(amplitude(k, BoundaryState{g, Grid({Axis::over(-2, 2, 8, false)}), Eigen::MatrixXcd::Zero(9, 8)}),
                  ShapeMismatch);
}

TEST_CASE("closed-form kernels") {
  // The packet is normalised.
  const GaussianPacket p{0.4, 0.7, 1.3};
  double n2 = 0;
  const double dx = 1e-3;
  for (double x = -12; x <= 12; x += dx) n2 += std::norm(p(x)) * dx;
  CHECK(n2 == doctest::Approx(1.0).epsilon(1e-8));

  // evolve() against direct quadrature of K psi.
  for (const QuadraticKernel& K : {QuadraticKernel::free(1.3, 0.8), QuadraticKernel::mehler(1.0, 1.0, kPi / 4)}) {
    for (double x : {-1.0, 0.2, 1.5}) {
      cplx acc = 0;
      for (double y = -15; y <= 15; y += dx) acc += K(x, y) * p(y) * dx;
      CHECK(std::abs(acc - K.evolve(p, x)) < 1e-6);
    }
  }
  // Mehler reduces to the free kernel as omega -> 0.
  const QuadraticKernel m = QuadraticKernel::mehler(1.0, 1e-6, 1.0), f = QuadraticKernel::free(1.0, 1.0);
  CHECK(std::abs(m(0.3, -0.2) - f(0.3, -0.2)) < 1e-6);
  CHECK(std::abs(f.norm - std::pow(2 * kPi * kI, -0.5)) < 1e-14);
  CHECK_THROWS_AS(QuadraticKernel::mehler(1.0, 1.0, kPi), DomainError);
}

TEST_CASE("natural systems") {
  const std::vector<ChartPoint> pts = {ChartPoint::Constant(1, 0.3), ChartPoint::Constant(1, -1.2)};
  const NaturalSystem osc = natural_system(spec_from("oscillator.json"), pts);
  CHECK(osc.g(pts[0])(0, 0) == doctest::Approx(1.0));
  CHECK(osc.V(pts[1]) == doctest::Approx(0.72));
  const NaturalSystem ring = natural_system(spec_from("ring.json"), pts);
  CHECK(ring.V(pts[0]) == doctest::Approx(-0.5 * std::cos(0.3)).epsilon(1e-12));
  CHECK(ring.g(pts[0])(0, 0) == doctest::Approx(1.0));

  auto non_natural = [&](const char* L) {
    const std::string text = std::string(R"({"dim": 1, "lagrangian": ")") + L + R"(", "domain": [{"min": -3, "max": 3}]})";
    return natural_system(parse_system_spec(text), pts);
  };
  CHECK_NOTHROW(non_natural("0.5*(1 + x1^2)*v1^2 - x1^4"));
  CHECK_THROWS_AS(non_natural("0.5*v1^2 + x1*v1"), NonNaturalLagrangian);
  CHECK_THROWS_AS(non_natural("0.5*v1^2 - t*x1^2"), NonNaturalLagrangian);
  CHECK_THROWS_AS(non_natural("0.5*v1^2 + 0.1*v1^4"), NonNaturalLagrangian);
  CHECK_THROWS_AS(non_natural("cos(v1)"), NonNaturalLagrangian);
  CHECK_THROWS_AS(
      natural_system(parse_system_spec(
                         R"({"dim": 1, "lagrangian": "0.5*v1^2", "metric": [["2"]], "domain": [{"min": -3, "max": 3}]})"),
                     pts),
      NonNaturalLagrangian);
}

TEST_CASE("Hamiltonian is half the Laplacian plus the potential") {
  const NaturalSystem osc = natural_system(spec_from("oscillator.json"), {ChartPoint::Zero(1)});
  const Grid g = Grid({Axis::over(-4, 4, 33, false)});
  const Eigen::MatrixXcd H(hamiltonian(osc, g));
  Eigen::MatrixXcd expected = 0.5 * Eigen::MatrixXcd(op_K_sparse(MetricField::identity(1), 0.0, g));
  for (int j = 0; j < g.size(); ++j) expected(j, j) += 0.5 * g.point(j)[0] * g.point(j)[0];
  CHECK((H - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((H - H.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("short-time kernel is the discrete delta") {
  const SystemSpec osc = spec_from("oscillator.json");
  const Grid g = Grid::from_domain(osc.domain, 64);
  for (PropagatorMethod m : {PropagatorMethod::CrankNicolson, PropagatorMethod::Trotter}) {
    const KernelMatrix k = phys_state(osc, 1e-13, g, {m, 1});
    CHECK((k.K * g.cell_volume() - Eigen::MatrixXcd::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(k.weight == cplx(0.5, 0.0));
  }
  CHECK_THROWS_AS(phys_state(osc, 0.0, g), DomainError);
  CHECK_THROWS_AS(phys_state(osc, 1.0, Grid({Axis::over(0, 1, 5, false), Axis::over(0, 1, 5, false)})), ShapeMismatch);
}

TEST_CASE("free kernel against the closed form") {
  const SystemSpec free = spec_from("free_particle.json");
  const Grid g = Grid::from_domain(free.domain, 256);
  const KernelMatrix k = phys_state(free, 1.0, g, {PropagatorMethod::Trotter, 512});
  CHECK(kernel_packet_error(k, QuadraticKernel::free(1.0, 1.0), kPackets) < 1e-3);
  CHECK(k.norm_drift < 1e-10);
  CHECK(kernel_packet_distance(k, k, kPackets) == 0.0);
}

TEST_CASE("Crank-Nicolson and Trotter agree for the oscillator") {
  const SystemSpec osc = spec_from("oscillator.json");
  // The second-difference Laplacian needs h ~ 0.05 for 1e-3 at T = 1.
  const Grid g({Axis::over(-8, 8, 321, false)});
  const KernelMatrix cn = phys_state(osc, 1.0, g, {PropagatorMethod::CrankNicolson, 512});
  const KernelMatrix tr = phys_state(osc, 1.0, g, {PropagatorMethod::Trotter, 512});
  CHECK(kernel_packet_distance(cn, tr, kPackets) < 1e-3);
  CHECK(kernel_packet_error(cn, QuadraticKernel::mehler(1.0, 1.0, 1.0), kPackets) < 1e-3);
  CHECK(cn.norm_drift < 1e-10);
  // Dynamical correlations: the kernel is far from a product.
  BoundaryState s = BoundaryState::from_kernel(cn);
  CHECK(s.numerical_rank(1e-6) > 10);
}

TEST_CASE("composition of Crank-Nicolson kernels") {
  const SystemSpec osc = spec_from("oscillator.json");
  const Grid g = Grid::from_domain(osc.domain, 96);
  const KernelMatrix k = phys_state(osc, 1.0, g, {PropagatorMethod::CrankNicolson, 200});
  const KernelMatrix k1 = phys_state(osc, 0.25, g, {PropagatorMethod::CrankNicolson, 50});
  const KernelMatrix k2 = phys_state(osc, 0.75, g, {PropagatorMethod::CrankNicolson, 150});
  const Eigen::MatrixXcd composed = k2.K * g.cell_volume() * k1.K;
  CHECK((composed - k.K).cwiseAbs().maxCoeff() < 1e-8 * k.K.cwiseAbs().maxCoeff());
}

TEST_CASE("composition of Trotter kernels") {
  const SystemSpec osc = spec_from("oscillator.json");
  const Grid g = Grid::from_domain(osc.domain, 128);
  const KernelMatrix a = phys_state(osc, 0.6, g, {PropagatorMethod::Trotter, 300});
  const KernelMatrix b = phys_state(osc, 0.4, g, {PropagatorMethod::Trotter, 200});
  const KernelMatrix ab = phys_state(osc, 1.0, g, {PropagatorMethod::Trotter, 500});
  const Eigen::MatrixXcd composed = b.evolution() * a.evolution();
  CHECK((composed - ab.evolution()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("propagator refuses unstable or unsupported runs") {
  const SystemSpec osc = spec_from("oscillator.json");
  const Grid g = Grid::from_domain(osc.domain, 64);
  PropagatorOptions opt{PropagatorMethod::Trotter, 64, 1, 1e-9};
  CHECK_THROWS_AS(phys_state(osc, 1.0, g, opt), Instability);

  const SystemSpec sph = spec_from("sphere.json");
  CHECK_THROWS_AS(phys_state(sph, 0.1, Grid::from_domain(sph.domain, 8), {PropagatorMethod::Trotter, 8}), Error);
  const SystemSpec bad = parse_system_spec(R"({"dim": 1, "lagrangian": "0.5*v1^2 + x1*v1", "domain": [{"min": -3, "max": 3}]})");
  CHECK_THROWS_AS(phys_state(bad, 0.5, Grid({Axis::over(-3, 3, 16, false)})), NonNaturalLagrangian);
}

TEST_CASE("threads do not change the kernel") {
  const SystemSpec an = spec_from("anharmonic.json");
  const Grid g = Grid::from_domain(an.domain, 64);
  const KernelMatrix a = phys_state(an, 0.5, g, {PropagatorMethod::CrankNicolson, 50, 1});
  const KernelMatrix b = phys_state(an, 0.5, g, {PropagatorMethod::CrankNicolson, 50, 3});
  CHECK((a.K - b.K).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("semiclassical measure of the oscillator") {
  const SystemSpec osc = spec_from("oscillator.json");
  const double T = kPi / 4;
  const Grid g = Grid::from_domain(osc.domain, 256);
  const KernelMatrix k = phys_state(osc, T, g, {PropagatorMethod::Trotter, 512});
  SemiclassicalOptions opt;
  opt.window_lo = -1.5;
  opt.window_hi = 1.5;
  opt.cutoff = 8.0;
  const std::vector<VectorField> fields = {
      VectorField::constant(Eigen::Vector2d(1.0, 0.0)), VectorField::constant(Eigen::Vector2d(1.0, 1.0)),
      VectorField({field("x1", 2), field("x2", 2)})};
  const SemiclassicalResult r = semiclassical_measure(k, classical_evaluator(osc, T, 100), fields, opt);
  const cplx exact = std::pow(2 * kPi * kI * std::sin(T), -0.5);
  CHECK(std::abs(r.mean - exact) < 0.01 * std::abs(exact));
  CHECK(r.max_rel_variation < 0.01);
  CHECK(r.residuals[0] < 0.02);
  CHECK(r.residuals[1] < 0.02);
  // No vector field beyond the parallel ones annihilates the kernel.
  CHECK(r.residuals[2] > 0.1);
  CHECK(r.measure.rows() == static_cast<int>(r.rows.size()));
  CHECK(r.action.rows() == r.measure.rows());

  // Classical action on the window is the analytic one.
  const int a = r.rows.front(), b = r.cols.back();
  const double xf = g.point(a)[0], xi = g.point(b)[0];
  const double S = ((xf * xf + xi * xi) * std::cos(T) - 2 * xf * xi) / (2 * std::sin(T));
  CHECK(r.action(0, r.cols.size() - 1) == doctest::Approx(S).epsilon(1e-3));

  opt.window_hi = 10.0;
  CHECK_THROWS_AS(semiclassical_measure(k, classical_evaluator(osc, T, 50), fields, opt), Error);
}

TEST_CASE("semiclassical measure of the free particle") {
  const SystemSpec free = spec_from("free_particle.json");
  const Grid g = Grid::from_domain(free.domain, 256);
  const KernelMatrix k = phys_state(free, 1.0, g, {PropagatorMethod::Trotter, 64});
  SemiclassicalOptions opt;
  opt.window_lo = -1.5;
  opt.window_hi = 1.5;
  opt.cutoff = 8.0;
  const SemiclassicalResult r = semiclassical_measure(
      k, classical_evaluator(free, 1.0, 20), {VectorField::constant(Eigen::Vector2d(1.0, 1.0))}, opt);
  CHECK(r.max_rel_variation < 0.01);
  CHECK(std::abs(r.mean - std::pow(2 * kPi * kI, -0.5)) < 0.01);
  CHECK(r.residuals[0] < 0.02);
}

TEST_CASE("fitted order") {
  CHECK(fitted_order({0.1, 0.05, 0.025}, {3e-2, 7.5e-3, 1.875e-3}) == doctest::Approx(2.0));
  CHECK(fitted_order({1, 2, 4, 8}, {5, 5, 5, 5}) == doctest::Approx(0.0));
}

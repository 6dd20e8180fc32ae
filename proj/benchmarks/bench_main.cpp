#include <numbers>
#include <string>

#include <benchmark/benchmark.h>

#include <bmech/bqm.hpp>
#include <bmech/classical.hpp>
#include <bmech/quantize.hpp>
#include <bmech/symplectic.hpp>

using namespace bmech;

namespace {

SystemSpec spec_from(const std::string& name) { return load_system_spec(std::string(BMECH_SPECS_DIR) + "/" + name); }

ChartPoint pt(double a) { return ChartPoint::Constant(1, a); }

void BM_ParseExpression(benchmark::State& state) {
  const SymbolTable syms = SymbolTable::lagrangian(2);
  ParamTable params;
  params.set("m", 1.0);
  const std::string text = "0.5*m*(v1^2 + sin(x1)^2*v2^2) - m*cos(x1) + exp(-x2^2/2)*log(3 + x1^2)";
  for (auto _ : state) benchmark::DoNotOptimize(parse_expression(text, syms, params));
}
BENCHMARK(BM_ParseExpression);

void BM_EvalDerivs(benchmark::State& state) {
  ParamTable params;
  params.set("m", 1.0);
  const Expr e = parse_expression("0.5*m*(v1^2 + sin(x1)^2*v2^2) - m*cos(x1)", SymbolTable::lagrangian(2), params);
  const std::vector<double> vars = {0.3, 1.1, -0.2, 0.7, 0.0};
  for (auto _ : state) benchmark::DoNotOptimize(eval_derivs(e, EvalEnv{vars, params.values}));
}
BENCHMARK(BM_EvalDerivs);

void BM_SolveClassical(benchmark::State& state) {
  const SystemSpec an = spec_from("anharmonic.json");
  const TimeGrid grid(0, 1.0, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_classical(an, pt(0.8), pt(-0.5), grid));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveClassical)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oN);

void BM_SolveSphere(benchmark::State& state) {
  const SystemSpec sph = spec_from("sphere.json");
  ChartPoint xi(2), xf(2);
  xi << 1.0, 0.2;
  xf << 1.4, 1.0;
  const TimeGrid grid(0, 1.0, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_classical(sph, xf, xi, grid));
}
BENCHMARK(BM_SolveSphere)->Arg(100)->Arg(400);

void BM_CovariantBracket(benchmark::State& state) {
  const SystemSpec osc = spec_from("oscillator.json");
  const ActionDerivs S = classical_action_derivs(osc, pt(0.4), pt(-0.3), TimeGrid(0, 1, 100));
  const BoundaryGreens G = boundary_greens(S);
  const BoundaryPhasePoint z = on_shell_point(S, pt(0.4), pt(-0.3));
  const SymbolTable syms = SymbolTable::boundary_phase(1);
  const Observable A = Observable::from_expr(parse_expression("xf1^2*pf1", syms, {}), {}, 1);
  const Observable B = Observable::from_expr(parse_expression("sin(xi1) + pi1", syms, {}), {}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(poisson_covariant(A, B, z, S, G));
}
BENCHMARK(BM_CovariantBracket);

void BM_AssembleOpG(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const Grid g({Axis::over(0, 2 * std::numbers::pi, M, true), Axis::over(-1, 1, M, false)});
  const VectorField a = VectorField::constant(Eigen::Vector2d(1.0, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(op_G_sparse(a, 0.3, g));
}
BENCHMARK(BM_AssembleOpG)->Arg(32)->Arg(128);

void BM_AssembleOpK(benchmark::State& state) {
  const SystemSpec sph = spec_from("sphere.json");
  const MetricField metric = MetricField::from_exprs(*sph.metric, sph.parameters.values);
  const Grid g = Grid::from_domain(sph.domain, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(op_K_sparse(metric, 1.0 / 6.0, g));
}
BENCHMARK(BM_AssembleOpK)->Arg(16)->Arg(48);

void BM_Propagator(benchmark::State& state) {
  const SystemSpec osc = spec_from("oscillator.json");
  const Grid g = Grid::from_domain(osc.domain, static_cast<int>(state.range(0)));
  const PropagatorMethod m = state.range(1) == 0 ? PropagatorMethod::CrankNicolson : PropagatorMethod::Trotter;
  for (auto _ : state) benchmark::DoNotOptimize(phys_state(osc, std::numbers::pi / 4, g, {m, 512}));
}
BENCHMARK(BM_Propagator)->Args({128, 0})->Args({128, 1})->Args({256, 0})->Args({256, 1})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "cli.hpp"

namespace {

void add_classical_flags(CLI::App* sub, bmech::cli::RunConfig& c, std::string& xi, std::string& xf) {
  sub->add_option("--xi", xi, "initial point, comma separated");
  sub->add_option("--xf", xf, "final point, comma separated");
  sub->add_option("--ti", c.ti, "initial time");
  sub->add_option("--tf", c.tf, "final time");
  sub->add_option("--slices", c.slices, "time slices");
}

}  // namespace

int main(int argc, char** argv) {
  bmech::cli::RunConfig c;
  c.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string xi, xf, at, window;

  CLI::App app{"Boundary phase space mechanics and quantization"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--spec", c.spec_path, "system description (JSON)");
  app.add_option("--out", c.out_path, "report path; CSV dumps go next to it");
  app.add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", c.seed, "seed for randomized checks");

  app.add_subcommand("parse", "validate a system description");

  auto* cl = app.add_subcommand("classical", "solve the two-point boundary value problem");
  add_classical_flags(cl, c, xi, xf);
  cl->add_option("--scan", c.scan, "final-time sweep a:b:k");

  auto* br = app.add_subcommand("brackets", "boundary and covariant Poisson brackets");
  br->add_option("--at", at, "x_f then x_i, comma separated")->required();
  br->add_option("--pairs", c.pairs, "A|B;C|D over xf, pf, xi, pi")->required();
  br->add_option("--ti", c.ti, "initial time");
  br->add_option("--tf", c.tf, "final time");
  br->add_option("--slices", c.slices, "time slices");

  auto* qc = app.add_subcommand("quantize-check", "operator identities on a grid");
  qc->add_option("--grid", c.grid, "points per axis");
  qc->add_option("--gamma", c.gamma, "ordering parameter");
  qc->add_option("--xi", c.xi_coupling, "curvature coupling of op_K");

  auto* pr = app.add_subcommand("propagator", "physical state kernel");
  auto* sc = app.add_subcommand("semiclassical", "amplitude decomposition K = a exp(i S)");
  for (auto* sub : {pr, sc}) {
    sub->add_option("--T", c.T, "elapsed time")->required();
    sub->add_option("--grid", c.grid, "points per axis");
    sub->add_option("--method", c.method, "cn or trotter")->check(CLI::IsMember({"cn", "trotter"}));
    sub->add_option("--slices", c.slices, "time steps");
  }
  pr->add_option("--oracle", c.oracle, "free or mehler")->check(CLI::IsMember({"free", "mehler"}));
  pr->add_option("--mass", c.mass, "oracle mass");
  pr->add_option("--omega", c.omega, "oracle frequency");
  sc->add_option("--window", window, "lo:hi box on every coordinate");
  sc->add_option("--cutoff", c.cutoff, "kernel smoothing pass band");
  sc->add_option("--fields", c.fields, "vector fields on Q x Q, ';' between fields");
  sc->add_option("--classical-slices", c.classical_slices, "slices for the classical action");
  sc->add_option("--gamma", c.gamma, "ordering parameter");

  auto* rp = app.add_subcommand("report", "aggregate earlier reports");
  rp->add_option("inputs", c.inputs, "report files")->required();

  try {
    app.parse(argc, argv);
    c.subcommand = app.get_subcommands().front()->get_name();
    if ((c.subcommand == "propagator" || c.subcommand == "semiclassical") && pr->count("--slices") + sc->count("--slices") == 0)
      c.slices = 512;
    c.xi = bmech::cli::parse_list(xi);
    c.xf = bmech::cli::parse_list(xf);
    c.at = bmech::cli::parse_list(at);
    if (!window.empty()) {
      const auto colon = window.find(':');
      if (colon == std::string::npos) throw bmech::cli::UsageError("--window expects lo:hi");
      const auto lo = bmech::cli::parse_list(window.substr(0, colon));
      const auto hi = bmech::cli::parse_list(window.substr(colon + 1));
      if (lo.size() != 1 || hi.size() != 1) throw bmech::cli::UsageError("--window expects lo:hi");
      c.window_lo = lo[0];
      c.window_hi = hi[0];
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const bmech::cli::UsageError& e) {
    std::cerr << "bmech: error: " << e.what() << "\n";
    return 1;
  }
  return bmech::cli::run(c, std::cout, std::cerr);
}

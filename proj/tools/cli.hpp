#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <bmech/errors.hpp>

namespace bmech::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Bad flag values or combinations; exit status 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string subcommand;
  std::string spec_path;
  std::string out_path;  // empty: report goes to the output stream
  int threads = 0;       // 0: hardware concurrency
  std::uint64_t seed = 0;

  // classical, brackets
  std::vector<double> xi, xf;
  double ti = 0.0;
  double tf = 1.0;
  int slices = 100;
  std::string scan;  // "a:b:k", k final times from a to b

  // brackets
  std::vector<double> at;  // x_f then x_i
  std::string pairs;       // "A|B;C|D" over xf, pf, xi, pi

  // quantize-check
  int grid = 64;
  double gamma = 0.0;
  double xi_coupling = 0.0;

  // propagator, semiclassical
  double T = 1.0;
  std::string method = "cn";
  std::string oracle;  // free | mehler
  double mass = 1.0;
  double omega = 1.0;
  int classical_slices = 100;
  double window_lo = -1.0;
  double window_hi = 1.0;
  std::optional<double> cutoff;
  std::string fields = "1,0";  // ';'-separated fields, ','-separated components

  // report
  std::vector<std::string> inputs;
};

// Runs one subcommand. Exit status 0 on success, 1 for usage, input and parse
// errors, 2 for numerical failures. The JSON report goes to out_path or `out`;
// diagnostics go to `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

std::vector<double> parse_list(const std::string& text);
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace bmech::cli

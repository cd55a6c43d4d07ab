#ifndef HAMDRIFT_CLI_CONFIG_HPP
#define HAMDRIFT_CLI_CONFIG_HPP

#include <array>
#include <string>
#include <vector>

#include "hamdrift/system.hpp"

namespace hamdrift::cli {

struct ConfigError : std::runtime_error {
  ConfigError(std::string msg, std::string pointer = "")
      : std::runtime_error(pointer.empty() ? msg : pointer + ": " + msg),
        pointer(std::move(pointer)) {}
  std::string pointer;  // JSON-pointer-style location of the offending field
};

struct TermSpec {
  int k = 0;
  std::string expr;
};

/// Everything one run needs: the system definition, chart resolution,
/// averaging order, simulation block and output directory.
struct RunConfig {
  int version = 1;
  std::string h0;
  int q = 1;
  double e0 = 1.0;
  std::vector<TermSpec> h_terms, f_terms;
  ParamEnv params;

  std::size_t n_e = 48;
  std::size_t n_phi = 256;
  int order = 3;

  std::vector<std::array<double, 2>> seeds;
  double t_end = 1e4;
  double tol = 1e-10;
  std::string out_dir = "out";

  /// Parse and validate every expression, check parameter completeness and
  /// the fixed-point invariants. Throws ConfigError with a JSON-pointer
  /// path and the offending term.
  PerturbedSystem build_system() const;
};

RunConfig parse_config_json(const std::string& text);
RunConfig load_config(const std::string& path);

/// Built-in example corpus. Recognized ids:
///   wkb-linear            damped-at-infinity linear oscillator
///                         (params: gamma, kappa = decay exponent n/q)
///   ex1-pendulum-linear   pendulum with a resonant-free term at order l
///                         and a linear friction term at order n
///                         (params: kap, lam; structural: n, q)
///   ex2-pendulum-x2y      pendulum with x^2*y at order m and y at order n
///                         (params: alpha, lam)
///   ex3-pendulum-x4y-x2y  pendulum with two nonlinear friction terms
///                         (params: delta, alpha)
///   ex4-harmonic-cycle    harmonic oscillator with an energy-saturating
///                         term producing a non-autonomous limit cycle
///                         (params: lam, mu, kap; structural: n, q)
/// `overrides` may set both ordinary parameters and the structural keys.
RunConfig builtin_example(const std::string& id_or_prefix,
                          const ParamEnv& overrides = {});

std::vector<std::string> builtin_example_ids();

/// "lam=-1,mu=0.5" -> bindings (repeatable, comma separated).
ParamEnv parse_param_list(const std::vector<std::string>& specs);

}  // namespace hamdrift::cli

#endif

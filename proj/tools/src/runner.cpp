#include "hamdrift_cli/runner.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "hamdrift/io.hpp"
#include "hamdrift_cli/config.hpp"

namespace hamdrift::cli {

namespace fs = std::filesystem;

namespace {

/// Artifact ledger; rewritten after every completed artifact so a partial
/// run still reports what it produced.
class Manifest {
 public:
  explicit Manifest(fs::path dir) : path_(dir / "MANIFEST") { flush(); }

  void add(const std::string& name, const std::string& status) {
    entries_.emplace_back(name, status);
    flush();
  }

 private:
  void flush() {
    std::ofstream out(path_, std::ios::binary);
    for (auto& [n, s] : entries_) out << n << " " << s << "\n";
  }
  fs::path path_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

// runs body(manifest); a failure is recorded before propagating
template <class Fn>
int with_manifest(const std::string& out_dir, Fn&& body) {
  fs::create_directories(out_dir);
  Manifest man(out_dir);
  try {
    return body(man);
  } catch (const std::exception& e) {
    man.add("(run)", std::string("aborted: ") + e.what());
    throw;
  }
}

struct CommonArgs {
  std::string config_path;
  std::string example_id;
  std::vector<std::string> params;
  std::string out_dir;
  double t_end = -1;
  double tol = -1;
  std::string grid;
};

RunConfig resolve_config(const CommonArgs& a) {
  if (!a.config_path.empty() && !a.example_id.empty())
    throw ConfigError("--config and --example are mutually exclusive", "");
  RunConfig cfg;
  ParamEnv overrides = parse_param_list(a.params);
  if (!a.example_id.empty()) {
    cfg = builtin_example(a.example_id, overrides);
  } else if (!a.config_path.empty()) {
    cfg = load_config(a.config_path);
    for (auto& [k, v] : overrides) cfg.params[k] = v;
  } else {
    throw ConfigError("one of --config or --example is required", "");
  }
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (a.t_end > 0) cfg.t_end = a.t_end;
  if (a.tol > 0) cfg.tol = a.tol;
  return cfg;
}

struct Stages {
  RunConfig cfg;
  std::unique_ptr<PerturbedSystem> sys;
  std::unique_ptr<ActionAngleChart> chart;
  std::unique_ptr<AveragedModel> model;

  void build_system() {
    sys = std::make_unique<PerturbedSystem>(cfg.build_system());
  }
  void build_chart_stage() {
    chart = std::make_unique<ActionAngleChart>(
        build_chart(*sys, cfg.n_e, cfg.n_phi));
  }
  void build_model_stage() {
    model = std::make_unique<AveragedModel>(
        build_averaged_model(*sys, *chart, cfg.order));
  }
};

std::function<double(double)> fresh_evaluator(const PerturbedSystem& sys,
                                              const AveragedModel& model) {
  return [&sys, &model](double E) -> double {
    try {
      return fresh_drift(sys, model, E);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
}

std::vector<std::array<double, 2>> seeds_or_default(const Stages& st) {
  if (!st.cfg.seeds.empty()) return st.cfg.seeds;
  return default_seeds(*st.sys);
}

int run_chart_cmd(Stages& st, std::ostream& out) {
  return with_manifest(st.cfg.out_dir, [&](Manifest& man) {
  st.build_system();
  st.build_chart_stage();
  write_chart_csv(*st.chart, (fs::path(st.cfg.out_dir) / "chart.csv").string());
  man.add("chart.csv", "ok");
  write_omega_csv(*st.chart, (fs::path(st.cfg.out_dir) / "omega.csv").string());
  man.add("omega.csv", "ok");
  out << "chart: " << st.chart->n_energy() << " energies x "
      << st.chart->n_phi() << " phases, energy defect "
      << st.chart->energy_defect() << "\n";
    for (const std::string& w : st.sys->warnings())
      out << "warning: " << w << "\n";
    return 0;
  });
}

int run_lambda_cmd(Stages& st, std::ostream& out) {
  return with_manifest(st.cfg.out_dir, [&](Manifest& man) {
  st.build_system();
  st.build_chart_stage();
  st.build_model_stage();
  write_lambda_csv(*st.model, (fs::path(st.cfg.out_dir) / "lambda.csv").string());
  man.add("lambda.csv", "ok");
  write_text_file((fs::path(st.cfg.out_dir) / "leading_fits.json").string(),
                  leading_fits_json(*st.model));
  man.add("leading_fits.json", "ok");
  for (const LeadingFit& f : st.model->leading) {
    out << "Lambda_" << f.k << ": ";
    if (f.zero)
      out << "identically zero\n";
    else if (f.fit_failed)
      out << "fit failed (" << f.note << ")\n";
    else
      out << "~ " << format_g17(f.coeff) << " * E^" << f.power
          << " (r2 = " << f.r2 << ")\n";
  }
  return 0;
  });
}

int run_classify_cmd(Stages& st, std::ostream& out) {
  return with_manifest(st.cfg.out_dir, [&](Manifest& man) {
  st.build_system();
  st.build_chart_stage();
  st.build_model_stage();
  StabilityVerdict v = classify_system(*st.sys, *st.chart, *st.model);
  write_text_file((fs::path(st.cfg.out_dir) / "verdict.json").string(),
                  verdict_json(v));
  man.add("verdict.json", "ok");
  std::string reports = "[\n";
  for (int thm : {1, 2, 3}) {
    TheoremReport rep = check_theorem_conditions(*st.sys, *st.chart, thm);
    reports += theorem_report_json(rep);
    if (thm != 3) reports += ",\n";
  }
  reports += "]\n";
  write_text_file(
      (fs::path(st.cfg.out_dir) / "theorem_conditions.json").string(), reports);
  man.add("theorem_conditions.json", "ok");
  out << verdict_text(v);
  return 0;
  });
}

int run_cycles_cmd(Stages& st, std::ostream& out) {
  return with_manifest(st.cfg.out_dir, [&](Manifest& man) {
  st.build_system();
  st.build_chart_stage();
  st.build_model_stage();
  CycleSet cs = find_cycles(*st.model, st.sys->q(), st.sys->e0(),
                            fresh_evaluator(*st.sys, *st.model));
  write_text_file((fs::path(st.cfg.out_dir) / "cycles.json").string(),
                  cycles_json(cs));
  man.add("cycles.json", "ok");
  if (cs.cycles.empty()) {
    out << "no limit cycles located\n";
  } else {
    for (const Cycle& c : cs.cycles)
      out << (c.stable ? "stable" : "unstable") << " cycle at E = "
          << format_g17(c.energy) << " (Lambda' = " << c.derivative << ")\n";
  }
  return 0;
  });
}

int run_simulate_cmd(Stages& st, std::ostream& out) {
  return with_manifest(st.cfg.out_dir, [&](Manifest& man) {
  st.build_system();
  auto seeds = seeds_or_default(st);
  IntegrateOptions io;
  io.tol = st.cfg.tol;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Trajectory traj =
        integrate(*st.sys, seeds[i][0], seeds[i][1], 1.0, st.cfg.t_end, io);
    char name[64];
    std::snprintf(name, sizeof name, "trajectory_%02zu.csv", i);
    write_trajectory_csv(traj, (fs::path(st.cfg.out_dir) / name).string());
    man.add(name, traj.blow_up ? "ok (blow-up, partial)" : "ok");
    out << "seed (" << seeds[i][0] << ", " << seeds[i][1]
        << "): E " << traj.e_start() << " -> " << traj.e_end()
        << (traj.blow_up ? " [blow-up]" : "") << "\n";
  }
  return 0;
  });
}

int run_verify_cmd(Stages& st, std::ostream& out) {
  return with_manifest(st.cfg.out_dir, [&](Manifest& man) {
  st.build_system();
  st.build_chart_stage();
  st.build_model_stage();
  StabilityVerdict v = classify_system(*st.sys, *st.chart, *st.model);
  CycleSet cs;
  if (st.model->summary.first_nonzero > 0)
    cs = find_cycles(*st.model, st.sys->q(), st.sys->e0(),
                     fresh_evaluator(*st.sys, *st.model));

  const Cycle* stable_cycle = nullptr;
  for (const Cycle& c : cs.cycles)
    if (c.stable && !c.degenerate) {
      stable_cycle = &c;
      break;
    }

  VerifyOptions vo;
  vo.t_end = st.cfg.t_end;
  vo.tol = st.cfg.tol;

  std::vector<std::array<double, 2>> origin_seeds;
  if (stable_cycle) {
    for (double f : {0.01, 0.05, 0.2})
      origin_seeds.push_back(locate_start(*st.sys, f * stable_cycle->energy));
  } else {
    origin_seeds = seeds_or_default(st);
  }
  VerifyReport rep = verify(*st.sys, v, origin_seeds, vo);

  std::string json = verify_report_json(rep, &cs);
  bool overall = rep.all_pass;
  out << verdict_text(v);
  for (const SeedOutcome& s : rep.seeds)
    out << "  seed (" << s.seed[0] << ", " << s.seed[1] << "): "
        << (s.pass ? "PASS" : "FAIL") << " [" << s.detail
        << "] measured = " << s.measured << ", predicted = " << s.predicted
        << "\n";

  if (stable_cycle) {
    std::vector<std::array<double, 2>> cyc_seeds;
    if (!st.cfg.seeds.empty()) {
      cyc_seeds = st.cfg.seeds;
    } else {
      double vc = stable_cycle->energy;
      for (double f : {0.5, 0.9, 1.5})
        cyc_seeds.push_back(
            locate_start(*st.sys, std::min(f * vc, 0.5 * (vc + st.sys->e0()))));
    }
    VerifyReport crep = verify_cycle(*st.sys, stable_cycle->energy, cyc_seeds, vo);
    out << "stable cycle at E = " << format_g17(stable_cycle->energy) << "\n";
    for (const SeedOutcome& s : crep.seeds)
      out << "  seed (" << s.seed[0] << ", " << s.seed[1] << "): "
          << (s.pass ? "PASS" : "FAIL") << " mean E = " << s.measured << "\n";
    overall = overall && crep.all_pass;
    // merge the two reports into one artifact
    std::ostringstream merged;
    merged << "{\n\"origin\": " << json << ",\n\"cycle\": "
           << verify_report_json(crep) << "}\n";
    json = merged.str();
  }

  write_text_file((fs::path(st.cfg.out_dir) / "verify_report.json").string(),
                  json);
  man.add("verify_report.json", "ok");

  std::ostringstream rates;
  rates << "[\n";
  for (std::size_t i = 0; i < rep.seeds.size(); ++i) {
    rates << rate_fit_json(rep.seeds[i].fit);
    if (i + 1 < rep.seeds.size()) rates << ",\n";
  }
  rates << "]\n";
  write_text_file((fs::path(st.cfg.out_dir) / "rates.json").string(),
                  rates.str());
  man.add("rates.json", "ok");

  out << (overall ? "verify: PASS\n" : "verify: FAIL\n");
  return 0;
  });
}

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

std::vector<GridAxis> parse_grid(const std::string& spec) {
  std::vector<GridAxis> axes;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("malformed --grid entry '" + item +
                            "' (expected name=lo:hi:count)",
                        "");
    GridAxis ax;
    ax.name = item.substr(0, eq);
    std::string rest = item.substr(eq + 1);
    double lo, hi;
    int count;
    if (std::sscanf(rest.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 ||
        count < 1)
      throw ConfigError("malformed --grid range '" + rest + "'", "");
    for (int i = 0; i < count; ++i)
      ax.values.push_back(count == 1
                              ? lo
                              : lo + (hi - lo) * static_cast<double>(i) /
                                        (count - 1));
    axes.push_back(std::move(ax));
  }
  if (axes.empty()) throw ConfigError("--grid is required for sweep", "");
  return axes;
}

int run_sweep_cmd(const CommonArgs& args, std::ostream& out) {
  RunConfig base = resolve_config(args);
  return with_manifest(base.out_dir, [&](Manifest& man) {
  std::vector<GridAxis> axes = parse_grid(args.grid);

  std::size_t total = 1;
  for (const GridAxis& ax : axes) total *= ax.values.size();

  // one cell = one override set; last axis varies fastest
  auto cell_env = [&](std::size_t idx) {
    ParamEnv env = parse_param_list(args.params);
    for (std::size_t a = axes.size(); a-- > 0;) {
      const GridAxis& ax = axes[a];
      env[ax.name] = ax.values[idx % ax.values.size()];
      idx /= ax.values.size();
    }
    return env;
  };

  auto make_config = [&](const ParamEnv& env) {
    if (!args.example_id.empty()) return builtin_example(args.example_id, env);
    RunConfig cfg = load_config(args.config_path);
    for (auto& [k, v] : env) cfg.params[k] = v;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
  };

  // charts depend only on H0, E0 and the grid; cache them across cells
  std::map<std::string, std::shared_ptr<const ActionAngleChart>> chart_cache;
  std::mutex cache_mutex;
  auto chart_for = [&](const RunConfig& cfg, const PerturbedSystem& sys) {
    std::ostringstream key;
    key << cfg.h0 << "|" << format_g17(cfg.e0) << "|" << cfg.n_e << "|"
        << cfg.n_phi;
    for (const std::string& p : Expr::parse(cfg.h0).parameters())
      key << "|" << p << "=" << format_g17(cfg.params.at(p));
    {
      std::lock_guard<std::mutex> lock(cache_mutex);
      auto it = chart_cache.find(key.str());
      if (it != chart_cache.end()) return it->second;
    }
    auto chart = std::make_shared<const ActionAngleChart>(
        build_chart(sys, cfg.n_e, cfg.n_phi));
    std::lock_guard<std::mutex> lock(cache_mutex);
    chart_cache.emplace(key.str(), chart);
    return chart_cache.at(key.str());
  };

  struct Row {
    ParamEnv env;
    StabilityVerdict v;
    bool error = false;
    std::string note;
  };
  std::vector<Row> rows(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      Row& row = rows[i];
      row.env = cell_env(i);
      try {
        RunConfig cfg = make_config(row.env);
        PerturbedSystem sys = cfg.build_system();
        auto chart = chart_for(cfg, sys);
        AveragedModel model = build_averaged_model(sys, *chart, cfg.order);
        row.v = classify_system(sys, *chart, model);
      } catch (const std::exception& e) {
        row.error = true;
        row.note = e.what();
      }
    }
  };
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < hw; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  CsvWriter w((fs::path(base.out_dir) / "sweep.csv").string());
  std::vector<std::string> header;
  for (const GridAxis& ax : axes) header.push_back(ax.name);
  for (const char* c :
       {"regime", "source", "n", "m", "s", "d", "q", "lambda_n", "gamma_ms",
        "gamma_nd", "weight_exponent", "rate_kind", "rate_exponent", "note"})
    header.push_back(c);
  w.row(header);
  for (const Row& row : rows) {
    std::vector<std::string> fields;
    for (const GridAxis& ax : axes)
      fields.push_back(format_g17(row.env.at(ax.name)));
    if (row.error) {
      fields.push_back("Error");
      for (int i = 0; i < 12; ++i) fields.push_back("");
      fields.push_back(row.note);
    } else {
      const StabilityVerdict& v = row.v;
      fields.push_back(regime_name(v.regime));
      fields.push_back(v.source);
      fields.push_back(std::to_string(v.inputs.n));
      fields.push_back(std::to_string(v.inputs.m));
      fields.push_back(std::to_string(v.inputs.s));
      fields.push_back(std::to_string(v.inputs.d));
      fields.push_back(std::to_string(v.inputs.q));
      fields.push_back(v.inputs.lambda_n ? format_g17(*v.inputs.lambda_n) : "");
      fields.push_back(v.inputs.gamma_ms ? format_g17(*v.inputs.gamma_ms) : "");
      fields.push_back(v.inputs.gamma_nd ? format_g17(*v.inputs.gamma_nd) : "");
      fields.push_back(v.weight_exponent ? format_g17(*v.weight_exponent) : "");
      fields.push_back(rate_kind_name(v.rate.kind));
      fields.push_back(v.rate.kind == RateKind::PowerLaw ||
                               v.rate.kind == RateKind::StretchedExponential
                           ? format_g17(v.rate.exponent)
                           : "");
      fields.push_back(v.note);
    }
    w.row(fields);
  }
  man.add("sweep.csv", "ok");
  out << "sweep: " << total << " cells -> sweep.csv\n";
  return 0;
  });
}

void add_common(CLI::App* cmd, CommonArgs& a, bool with_grid = false) {
  cmd->add_option("--config", a.config_path, "JSON run configuration");
  cmd->add_option("--example", a.example_id,
                  "built-in example id (see `hamdrift list`)");
  cmd->add_option("--param", a.params,
                  "parameter overrides, name=value[,name=value...]");
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--tend", a.t_end, "simulation end time");
  cmd->add_option("--tol", a.tol, "integration tolerance");
  if (with_grid)
    cmd->add_option("--grid", a.grid,
                    "sweep grid, name=lo:hi:count[,name=lo:hi:count...]");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{
      "analysis of planar asymptotically Hamiltonian systems with "
      "power-law decaying perturbations"};
  app.require_subcommand(0, 1);

  std::map<std::string, CommonArgs> cargs;
  CLI::App* c_chart = app.add_subcommand(
      "chart", "build and export the action-angle chart of the limiting system");
  add_common(c_chart, cargs["chart"]);
  CLI::App* c_lambda = app.add_subcommand(
      "lambda", "compute the averaged drift coefficients and leading fits");
  add_common(c_lambda, cargs["lambda"]);
  CLI::App* c_classify =
      app.add_subcommand("classify", "stability verdict for the equilibrium");
  add_common(c_classify, cargs["classify"]);
  CLI::App* c_cycles =
      app.add_subcommand("cycles", "locate non-autonomous limit cycles");
  add_common(c_cycles, cargs["cycles"]);
  CLI::App* c_sim =
      app.add_subcommand("simulate", "integrate the full system from seeds");
  add_common(c_sim, cargs["simulate"]);
  CLI::App* c_verify = app.add_subcommand(
      "verify", "classify, then validate the prediction by direct integration");
  add_common(c_verify, cargs["verify"]);
  CLI::App* c_sweep = app.add_subcommand(
      "sweep", "parameter sweep emitting one verdict row per grid point");
  add_common(c_sweep, cargs["sweep"], true);
  CLI::App* c_list = app.add_subcommand("list", "list built-in examples");

  std::vector<const char*> argv;
  argv.push_back("hamdrift");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (c_list->parsed()) {
      for (const std::string& id : builtin_example_ids()) out << id << "\n";
      return 0;
    }
    for (auto& [name, a] : cargs) {
      CLI::App* sub = app.get_subcommand(name);
      if (!sub->parsed()) continue;
      if (name == "sweep") return run_sweep_cmd(a, out);
      Stages st;
      st.cfg = resolve_config(a);
      if (name == "chart") return run_chart_cmd(st, out);
      if (name == "lambda") return run_lambda_cmd(st, out);
      if (name == "classify") return run_classify_cmd(st, out);
      if (name == "cycles") return run_cycles_cmd(st, out);
      if (name == "simulate") return run_simulate_cmd(st, out);
      if (name == "verify") return run_verify_cmd(st, out);
    }
    err << "no subcommand given (try --help)\n";
    return 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace hamdrift::cli

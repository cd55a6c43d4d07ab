#include "hamdrift/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hamdrift {

using ordered_json = nlohmann::ordered_json;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvWriter::Impl {
  std::ofstream out;
};

CsvWriter::CsvWriter(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out)
    throw std::runtime_error("CsvWriter: cannot open '" + path + "'");
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) impl_->out << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") != std::string::npos) {
      impl_->out << '"';
      for (char c : f) {
        if (c == '"') impl_->out << '"';
        impl_->out << c;
      }
      impl_->out << '"';
    } else {
      impl_->out << f;
    }
  }
  impl_->out << "\r\n";
}

void CsvWriter::numeric_row(const std::vector<double>& values) {
  std::vector<std::string> fields;
  fields.reserve(values.size());
  for (double v : values) fields.push_back(format_g17(v));
  row(fields);
}

void write_chart_csv(const ActionAngleChart& chart, const std::string& path) {
  CsvWriter w(path);
  w.row({"E", "j", "phi", "X", "Y"});
  double dphi = 2.0 * 3.14159265358979323846 / static_cast<double>(chart.n_phi());
  for (std::size_t ie = 0; ie < chart.n_energy(); ++ie) {
    for (std::size_t j = 0; j < chart.n_phi(); ++j) {
      w.row({format_g17(chart.energies()[ie]), std::to_string(j),
             format_g17(dphi * static_cast<double>(j)),
             format_g17(chart.x_at(ie, j)), format_g17(chart.y_at(ie, j))});
    }
  }
}

void write_omega_csv(const ActionAngleChart& chart, const std::string& path) {
  CsvWriter w(path);
  w.row({"E", "omega"});
  for (std::size_t ie = 0; ie < chart.n_energy(); ++ie)
    w.numeric_row({chart.energies()[ie], chart.omegas()[ie]});
}

void write_lambda_csv(const AveragedModel& model, const std::string& path) {
  CsvWriter w(path);
  std::vector<std::string> header = {"E"};
  for (int k = 1; k <= model.order; ++k)
    header.push_back("Lambda_" + std::to_string(k));
  w.row(header);
  for (std::size_t i = 0; i < model.energies.size(); ++i) {
    std::vector<double> vals = {model.energies[i]};
    for (int k = 1; k <= model.order; ++k) vals.push_back(model.lambda.at(k)[i]);
    w.numeric_row(vals);
  }
}

std::string leading_fits_json(const AveragedModel& model) {
  ordered_json arr = ordered_json::array();
  for (const LeadingFit& f : model.leading) {
    ordered_json j;
    j["k"] = f.k;
    j["zero"] = f.zero;
    if (!f.zero && !f.fit_failed) {
      j["power"] = f.power;
      j["coeff"] = f.coeff;
      j["r2"] = f.r2;
      j["integer_power"] = f.integer_power;
    }
    if (f.fit_failed) j["fit_failed"] = true;
    if (!f.note.empty()) j["note"] = f.note;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

namespace {

ordered_json rate_to_json(const RatePrediction& r) {
  ordered_json j;
  j["kind"] = rate_kind_name(r.kind);
  if (r.kind == RateKind::PowerLaw || r.kind == RateKind::StretchedExponential)
    j["exponent"] = r.exponent;
  else
    j["exponent"] = nullptr;
  if (r.cycle_energy)
    j["cycle_energy"] = *r.cycle_energy;
  else
    j["cycle_energy"] = nullptr;
  if (r.one_sided) j["one_sided"] = true;
  return j;
}

ordered_json verdict_to_json_obj(const StabilityVerdict& v) {
  ordered_json j;
  j["regime"] = regime_name(v.regime);
  if (v.weight_exponent)
    j["weight_exponent"] = *v.weight_exponent;
  else
    j["weight_exponent"] = nullptr;
  j["rate"] = rate_to_json(v.rate);
  j["source"] = v.source;
  ordered_json in;
  in["q"] = v.inputs.q;
  if (v.inputs.n) in["n"] = v.inputs.n;
  if (v.inputs.m) in["m"] = v.inputs.m;
  if (v.inputs.s) in["s"] = v.inputs.s;
  if (v.inputs.d) in["d"] = v.inputs.d;
  if (v.inputs.lambda_n) in["lambda_n"] = *v.inputs.lambda_n;
  if (v.inputs.gamma_ms) in["gamma_ms"] = *v.inputs.gamma_ms;
  if (v.inputs.gamma_nd) in["gamma_nd"] = *v.inputs.gamma_nd;
  j["inputs"] = in;
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

}  // namespace

std::string verdict_json(const StabilityVerdict& verdict) {
  return verdict_to_json_obj(verdict).dump(2) + "\n";
}

std::string verdict_text(const StabilityVerdict& v) {
  std::ostringstream os;
  os << "verdict: " << regime_name(v.regime) << " (" << v.source << ")\n";
  if (v.inputs.n) os << "  n = " << v.inputs.n;
  if (v.inputs.m) os << "  m = " << v.inputs.m;
  if (v.inputs.s) os << "  s = " << v.inputs.s;
  if (v.inputs.d) os << "  d = " << v.inputs.d;
  os << "  q = " << v.inputs.q << "\n";
  if (v.inputs.lambda_n) os << "  lambda_n = " << *v.inputs.lambda_n << "\n";
  if (v.inputs.gamma_ms) os << "  gamma_ms = " << *v.inputs.gamma_ms << "\n";
  if (v.inputs.gamma_nd) os << "  gamma_nd = " << *v.inputs.gamma_nd << "\n";
  switch (v.rate.kind) {
    case RateKind::PowerLaw:
      os << "  predicted energy law: E ~ t^" << v.rate.exponent
         << (v.rate.one_sided ? " (upper bound)" : "") << "\n";
      break;
    case RateKind::StretchedExponential:
      os << "  predicted energy law: log E drifts linearly in t^"
         << v.rate.exponent << "\n";
      break;
    case RateKind::ConvergesToCycle:
      if (v.rate.cycle_energy)
        os << "  converges to the cycle at E = " << *v.rate.cycle_energy << "\n";
      break;
    case RateKind::None: break;
  }
  if (v.weight_exponent)
    os << "  instability weight: t^" << *v.weight_exponent
       << " in the (x, y) variables\n";
  if (!v.note.empty()) os << "  note: " << v.note << "\n";
  return os.str();
}

std::string cycles_json(const CycleSet& cs) {
  ordered_json j;
  j["order"] = cs.order;
  j["convergence_claim"] = cs.convergence_claim;
  ordered_json arr = ordered_json::array();
  for (const Cycle& c : cs.cycles) {
    ordered_json cj;
    cj["energy"] = c.energy;
    cj["stable"] = c.stable;
    cj["derivative"] = c.derivative;
    if (c.boundary) cj["boundary"] = true;
    if (c.degenerate) cj["degenerate"] = true;
    arr.push_back(cj);
  }
  j["cycles"] = arr;
  return j.dump(2) + "\n";
}

std::string theorem_report_json(const TheoremReport& rep) {
  ordered_json j;
  j["theorem"] = rep.theorem;
  j["applicable"] = rep.applicable;
  j["passed"] = rep.passed;
  ordered_json checks = ordered_json::array();
  for (const ConditionCheck& c : rep.checks) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["pass"] = c.pass;
    cj["residual"] = c.residual;
    if (!c.detail.empty()) cj["detail"] = c.detail;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  ordered_json ex;
  for (auto& [k, v] : rep.extracted) ex[k] = v;
  j["extracted"] = ex;
  if (!rep.detail.empty()) j["detail"] = rep.detail;
  return j.dump(2) + "\n";
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  CsvWriter w(path);
  w.row({"t", "x", "y", "E"});
  for (std::size_t i = 0; i < traj.t.size(); ++i)
    w.numeric_row({traj.t[i], traj.x[i], traj.y[i], traj.e[i]});
}

std::string rate_fit_json(const RateFit& fit) {
  ordered_json j;
  j["kind"] = rate_kind_name(fit.kind);
  j["exponent"] = fit.fitted_exponent;
  j["r2"] = fit.r2;
  j["window"] = {fit.window_lo, fit.window_hi};
  if (fit.kind == RateKind::ConvergesToCycle) j["drift"] = fit.drift;
  return j.dump(2) + "\n";
}

std::string verify_report_json(const VerifyReport& rep,
                               const CycleSet* cycles) {
  ordered_json j;
  j["verdict"] = verdict_to_json_obj(rep.verdict);
  if (cycles) j["cycles"] = ordered_json::parse(cycles_json(*cycles));
  ordered_json seeds = ordered_json::array();
  for (const SeedOutcome& s : rep.seeds) {
    ordered_json sj;
    sj["seed"] = {s.seed[0], s.seed[1]};
    sj["e_start"] = s.e_start;
    sj["pass"] = s.pass;
    sj["measured"] = s.measured;
    sj["predicted"] = s.predicted;
    sj["detail"] = s.detail;
    seeds.push_back(sj);
  }
  j["seeds"] = seeds;
  j["pass"] = rep.all_pass;
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "'");
  out << content;
}

}  // namespace hamdrift

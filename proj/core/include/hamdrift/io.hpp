#ifndef HAMDRIFT_IO_HPP
#define HAMDRIFT_IO_HPP

#include <string>
#include <vector>

#include "hamdrift/averaging.hpp"
#include "hamdrift/chart.hpp"
#include "hamdrift/classify.hpp"
#include "hamdrift/sim.hpp"

namespace hamdrift {

/// 17 significant digits, '.' decimal separator, locale independent.
std::string format_g17(double v);

/// Minimal RFC 4180 writer: comma separated, CRLF records. All output is
/// byte-deterministic for identical inputs.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& fields);
  void numeric_row(const std::vector<double>& values);

 private:
  struct Impl;
  Impl* impl_;
};

/// Chart export: rows (E, j, phi_j, X, Y).
void write_chart_csv(const ActionAngleChart& chart, const std::string& path);
/// Companion frequency table: rows (E, omega).
void write_omega_csv(const ActionAngleChart& chart, const std::string& path);

/// Drift-curve export: columns (E, Lambda_1, ..., Lambda_N).
void write_lambda_csv(const AveragedModel& model, const std::string& path);

/// Leading-fit report: [{"k":..., "power":..., "coeff":..., "r2":...}, ...]
std::string leading_fits_json(const AveragedModel& model);

std::string verdict_json(const StabilityVerdict& verdict);
std::string verdict_text(const StabilityVerdict& verdict);

std::string cycles_json(const CycleSet& cycles);

std::string theorem_report_json(const TheoremReport& rep);

/// Trajectory export: columns (t, x, y, E).
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

std::string rate_fit_json(const RateFit& fit);

std::string verify_report_json(const VerifyReport& rep,
                               const CycleSet* cycles = nullptr);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace hamdrift

#endif

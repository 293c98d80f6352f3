#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "heliofarm/core/time.hpp"

namespace heliofarm::anomaly {

struct TimeSeries {
  std::vector<Timestamp> at;  // strictly increasing
  std::vector<std::optional<double>> value;

  std::size_t size() const { return at.size(); }
  void validate() const;
};

struct FitConfig {
  int changepoints = 25;          // J
  double changepoint_range = 0.8;  // share of the fit span holding changepoints
  int fourier_order = 6;          // N
  double period_days = 1.0;       // P
  double ridge = 1e-4;            // λ on hinge and holiday coefficients
  std::vector<Date> holidays;
  double level = 0.99;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientDataError : public FitError {
 public:
  using FitError::FitError;
};

/// y(t) = m + k t + Σ δ_j max(0, t − s_j) + Σ [a_n cos(2πnt/P) + b_n sin(2πnt/P)] + Σ h_d [date(t) = d],
/// with t in days since `origin`.
struct TrendModel {
  Timestamp origin{};
  double k = 0.0;
  double m = 0.0;
  std::vector<double> changepoints;  // s_j, days
  std::vector<double> deltas;
  double period_days = 1.0;
  std::vector<double> fourier;  // a_1, b_1, a_2, b_2, ...
  std::vector<Date> holidays;
  std::vector<double> holiday_effects;
  double sigma = 0.0;  // residual standard deviation
  double level = 0.99;

  int order() const { return static_cast<int>(fourier.size() / 2); }
  double days_since_origin(Timestamp t) const;
  double predict(Timestamp t) const;
};

/// Number of design columns fit() uses for `config`.
int design_columns(const FitConfig& config);

TrendModel fit(const TimeSeries& series, const FitConfig& config = {});

/// Gaussian quantile z for a two-sided band of probability `level`.
double band_z(double level);

struct Band {
  std::vector<double> yhat, low, high;
};

Band predict_with_band(const TrendModel& model, std::span<const Timestamp> at);

/// Indices whose non-null value lies outside the band.
std::vector<std::size_t> detect(const TimeSeries& series, const Band& band);
std::vector<std::size_t> detect(const TimeSeries& series, const TrendModel& model);

enum class RepairMethod { linear, quadratic, cubic, spline };

std::string_view to_string(RepairMethod m);
RepairMethod parse_repair_method(std::string_view text);

struct Repair {
  TimeSeries series;
  std::vector<bool> replaced;
  std::vector<std::string> warnings;
};

/// Replaces flagged points and nulls by interpolating the remaining points. Points without
/// support on both sides keep the nearest supported value and produce a warning.
Repair repair(const TimeSeries& series, std::span<const std::size_t> flagged, RepairMethod method);

struct OutlierReport {
  TimeSeries observed;
  Band band;
  std::vector<std::size_t> flagged;
  RepairMethod method = RepairMethod::linear;
  Repair repaired;
  TrendModel model;
};

/// prepare → fit → timestamps → predict → identify → replace.
OutlierReport run_workflow(const TimeSeries& series, const FitConfig& config, RepairMethod method);

/// CSV `at,observed,yhat,low,high,flagged,repaired`.
void write_report_csv(std::ostream& out, const OutlierReport& report);

struct ReportRow {
  Timestamp at;
  std::optional<double> observed;
  double yhat, low, high;
  bool flagged;
  std::optional<double> repaired;
};
std::vector<ReportRow> parse_report_csv(std::string_view csv);

}  // namespace heliofarm::anomaly

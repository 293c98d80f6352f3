#include "heliofarm/anomaly/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "heliofarm/core/text.hpp"

namespace heliofarm::anomaly {

void TimeSeries::validate() const {
  if (at.size() != value.size()) throw std::invalid_argument("timestamps and values differ in length");
  for (std::size_t i = 1; i < at.size(); ++i) {
    if (at[i] <= at[i - 1]) throw std::invalid_argument("timestamps must be strictly increasing");
  }
}

double TrendModel::days_since_origin(Timestamp t) const { return static_cast<double>((t - origin).count()) / 86400.0; }

namespace {

// Fills one design row; returns the number of columns written.
int design_row(double t, Date day, const std::vector<double>& cps, int order, double period,
               const std::vector<Date>& holidays, double* row) {
  int c = 0;
  row[c++] = 1.0;
  row[c++] = t;
  for (double s : cps) row[c++] = std::max(0.0, t - s);
  for (int n = 1; n <= order; ++n) {
    const double w = 2.0 * std::numbers::pi * n * t / period;
    row[c++] = std::cos(w);
    row[c++] = std::sin(w);
  }
  for (Date h : holidays) row[c++] = day == h ? 1.0 : 0.0;
  return c;
}

}  // namespace

double TrendModel::predict(Timestamp t) const {
  std::vector<double> row(2 + changepoints.size() + fourier.size() + holidays.size());
  design_row(days_since_origin(t), day_of(t), changepoints, order(), period_days, holidays, row.data());
  double y = m * row[0] + k * row[1];
  std::size_t c = 2;
  for (double d : deltas) y += d * row[c++];
  for (double f : fourier) y += f * row[c++];
  for (double h : holiday_effects) y += h * row[c++];
  return y;
}

int design_columns(const FitConfig& config) {
  return 2 + config.changepoints + 2 * config.fourier_order + static_cast<int>(config.holidays.size());
}

TrendModel fit(const TimeSeries& series, const FitConfig& config) {
  series.validate();
  if (config.changepoints < 0) throw std::invalid_argument("changepoint count must be >= 0");
  if (config.fourier_order < 1) throw std::invalid_argument("fourier order must be >= 1");
  if (!(config.period_days > 0.0)) throw std::invalid_argument("seasonal period must be positive");
  if (!(config.level > 0.0 && config.level < 1.0)) throw std::invalid_argument("band level must be in (0, 1)");

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.value[i]) idx.push_back(i);
  }
  const int p = design_columns(config);
  if (idx.size() < static_cast<std::size_t>(2 * p)) {
    throw InsufficientDataError(fmt::format("fit needs at least {} non-null points, got {}", 2 * p, idx.size()));
  }

  TrendModel model;
  model.origin = series.at[idx.front()];
  model.period_days = config.period_days;
  model.holidays = config.holidays;
  model.level = config.level;
  const double span = model.days_since_origin(series.at[idx.back()]);
  for (int j = 1; j <= config.changepoints; ++j) {
    model.changepoints.push_back(config.changepoint_range * span * j / config.changepoints);
  }

  // Ridge rows appended below the data rows penalize hinge and holiday columns only.
  const int hinge0 = 2, fourier0 = hinge0 + config.changepoints, holiday0 = fourier0 + 2 * config.fourier_order;
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  const int penalized = config.changepoints + static_cast<int>(config.holidays.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n + penalized, p);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n + penalized);
  std::vector<double> row(p);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Timestamp at = series.at[idx[r]];
    design_row(model.days_since_origin(at), day_of(at), model.changepoints, config.fourier_order, config.period_days,
               config.holidays, row.data());
    for (int c = 0; c < p; ++c) X(r, c) = row[c];
    y(r) = *series.value[idx[r]];
  }
  const double root = std::sqrt(config.ridge);
  Eigen::Index r = n;
  for (int c = hinge0; c < fourier0; ++c) X(r++, c) = root;
  for (int c = holiday0; c < p; ++c) X(r++, c) = root;

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) {
    throw FitError(fmt::format("design matrix is rank deficient ({} of {} columns)", qr.rank(), p));
  }
  const Eigen::VectorXd beta = qr.solve(y);
  model.m = beta(0);
  model.k = beta(1);
  for (int c = hinge0; c < fourier0; ++c) model.deltas.push_back(beta(c));
  for (int c = fourier0; c < holiday0; ++c) model.fourier.push_back(beta(c));
  for (int c = holiday0; c < p; ++c) model.holiday_effects.push_back(beta(c));

  const Eigen::VectorXd residual = y.head(n) - X.topRows(n) * beta;
  const double mean = residual.mean();
  model.sigma = std::sqrt((residual.array() - mean).square().sum() / static_cast<double>(n));
  return model;
}

double band_z(double level) {
  const boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, (1.0 + level) / 2.0);
}

Band predict_with_band(const TrendModel& model, std::span<const Timestamp> at) {
  const double half = band_z(model.level) * model.sigma;
  Band b;
  for (Timestamp t : at) {
    const double y = model.predict(t);
    b.yhat.push_back(y);
    b.low.push_back(y - half);
    b.high.push_back(y + half);
  }
  return b;
}

std::vector<std::size_t> detect(const TimeSeries& series, const Band& band) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& v = series.value[i];
    if (v && (*v < band.low[i] || *v > band.high[i])) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> detect(const TimeSeries& series, const TrendModel& model) {
  return detect(series, predict_with_band(model, series.at));
}

std::string_view to_string(RepairMethod m) {
  switch (m) {
    case RepairMethod::linear: return "linear";
    case RepairMethod::quadratic: return "quadratic";
    case RepairMethod::cubic: return "cubic";
    case RepairMethod::spline: return "spline";
  }
  return "?";
}

RepairMethod parse_repair_method(std::string_view text) {
  if (text == "linear") return RepairMethod::linear;
  if (text == "quadratic") return RepairMethod::quadratic;
  if (text == "cubic") return RepairMethod::cubic;
  if (text == "spline") return RepairMethod::spline;
  throw std::invalid_argument(fmt::format("unknown repair method '{}' (linear, quadratic, cubic, spline)", text));
}

namespace {

double lagrange(std::span<const double> xs, std::span<const double> ys, double x) {
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double w = 1.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (j != i) w *= (x - xs[j]) / (xs[i] - xs[j]);
    }
    sum += w * ys[i];
  }
  return sum;
}

// Natural cubic spline through (xs, ys); second derivatives by the tridiagonal (Thomas) solve.
class NaturalSpline {
 public:
  NaturalSpline(std::vector<double> xs, std::vector<double> ys) : x_(std::move(xs)), y_(std::move(ys)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      a[i] = h0;
      b[i] = 2.0 * (h0 + h1);
      c[i] = h1;
      d[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    m_[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
  }

  double operator()(double x) const {
    const auto hi = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(hi - x_.begin()), 1, x_.size() - 1) - 1;
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - x) / h, B = (x - x_[i]) / h;
    return A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> x_, y_, m_;
};

std::size_t points_needed(RepairMethod m) {
  switch (m) {
    case RepairMethod::linear: return 2;
    case RepairMethod::quadratic: return 3;
    case RepairMethod::cubic: return 4;
    case RepairMethod::spline: return 4;
  }
  return 2;
}

}  // namespace

Repair repair(const TimeSeries& series, std::span<const std::size_t> flagged, RepairMethod method) {
  series.validate();
  const std::size_t n = series.size();
  std::vector<bool> target(n, false);
  for (std::size_t i : flagged) {
    if (i >= n) throw std::out_of_range("flagged index outside the series");
    target[i] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!series.value[i]) target[i] = true;
  }

  // Support: every untouched point, positioned in days from the first timestamp.
  std::vector<double> sx, sy;
  std::vector<std::size_t> pos(n);  // number of support points strictly before i
  for (std::size_t i = 0; i < n; ++i) {
    pos[i] = sx.size();
    if (!target[i]) {
      sx.push_back(static_cast<double>((series.at[i] - series.at[0]).count()) / 86400.0);
      sy.push_back(*series.value[i]);
    }
  }

  Repair out{series, std::vector<bool>(n, false), {}};
  if (std::none_of(target.begin(), target.end(), [](bool b) { return b; })) return out;
  if (sx.empty()) {
    out.warnings.push_back("no valid points to repair from; series left unchanged");
    return out;
  }
  std::optional<NaturalSpline> spline;
  if (method == RepairMethod::spline && sx.size() >= 2) spline.emplace(sx, sy);

  const std::size_t need = points_needed(method);
  std::size_t held = 0, degraded = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!target[i]) continue;
    const double x = static_cast<double>((series.at[i] - series.at[0]).count()) / 86400.0;
    const std::size_t right = pos[i];  // first support index after i
    const bool has_left = right > 0, has_right = right < sx.size();
    double v;
    if (!has_left || !has_right) {
      v = has_left ? sy[right - 1] : sy[right];
      ++held;
    } else if (spline) {
      v = (*spline)(x);
    } else {
      // Grow outwards from the bracketing pair, preferring the nearer side (left on ties).
      std::size_t lo = right - 1, hi = right;  // inclusive window [lo, hi]
      while (hi - lo + 1 < need) {
        const bool can_l = lo > 0, can_r = hi + 1 < sx.size();
        if (!can_l && !can_r) break;
        if (can_l && (!can_r || x - sx[lo - 1] <= sx[hi + 1] - x)) {
          --lo;
        } else {
          ++hi;
        }
      }
      if (hi - lo + 1 < need) ++degraded;
      v = lagrange(std::span(sx).subspan(lo, hi - lo + 1), std::span(sy).subspan(lo, hi - lo + 1), x);
    }
    out.series.value[i] = v;
    out.replaced[i] = true;
  }
  if (held > 0) {
    out.warnings.push_back(fmt::format("{} point(s) at the series boundary lack support on one side; held nearest value",
                                       held));
  }
  if (degraded > 0) {
    out.warnings.push_back(fmt::format("{} point(s) had fewer than {} support points; used a lower-order polynomial",
                                       degraded, need));
  }
  return out;
}

OutlierReport run_workflow(const TimeSeries& series, const FitConfig& config, RepairMethod method) {
  OutlierReport r;
  r.observed = series;
  r.method = method;
  r.model = fit(series, config);
  r.band = predict_with_band(r.model, series.at);
  r.flagged = detect(series, r.band);
  r.repaired = repair(series, r.flagged, method);
  return r;
}

void write_report_csv(std::ostream& out, const OutlierReport& report) {
  out << "at,observed,yhat,low,high,flagged,repaired\n";
  std::vector<bool> flag(report.observed.size(), false);
  for (std::size_t i : report.flagged) flag[i] = true;
  std::string line;
  for (std::size_t i = 0; i < report.observed.size(); ++i) {
    line = format_datetime(report.observed.at[i], 'T');
    line += ',';
    if (const auto& v = report.observed.value[i]) line += fmt::format("{}", *v);
    line += fmt::format(",{:.6f},{:.6f},{:.6f},{},", report.band.yhat[i], report.band.low[i], report.band.high[i],
                        flag[i] ? 1 : 0);
    if (const auto& v = report.repaired.series.value[i]) line += fmt::format("{:.6f}", *v);
    line += '\n';
    out << line;
  }
}

std::vector<ReportRow> parse_report_csv(std::string_view csv) {
  LineReader lines(csv);
  std::string_view line;
  if (!lines.next(line) || line != "at,observed,yhat,low,high,flagged,repaired") {
    throw std::runtime_error("outlier report: unexpected header");
  }
  std::vector<ReportRow> rows;
  auto number = [&](std::string_view f) {
    auto v = parse_double(f);
    if (!v) throw std::runtime_error(fmt::format("outlier report line {}: bad number '{}'", lines.line_number(), f));
    return *v;
  };
  while (lines.next(line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw std::runtime_error(fmt::format("outlier report line {}: expected 7 fields", lines.line_number()));
    ReportRow r;
    r.at = parse_datetime(f[0]);
    if (!f[1].empty()) r.observed = number(f[1]);
    r.yhat = number(f[2]);
    r.low = number(f[3]);
    r.high = number(f[4]);
    r.flagged = f[5] == "1";
    if (!f[6].empty()) r.repaired = number(f[6]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace heliofarm::anomaly

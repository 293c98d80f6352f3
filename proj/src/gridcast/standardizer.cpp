#include "heliofarm/gridcast/standardizer.hpp"

#include <cmath>

namespace heliofarm::gridcast {

Standardizer fit_standardizer(std::span<const double> values) {
  if (values.empty()) throw DegenerateDataError("cannot standardize an empty set");
  // Two passes keep the variance accurate for large offsets.
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mu = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  const double sigma = std::sqrt(ss / static_cast<double>(values.size()));
  if (!(sigma > 0.0)) throw DegenerateDataError("standard deviation is zero; data is constant");
  return {mu, sigma};
}

}  // namespace heliofarm::gridcast

#pragma once

#include <span>
#include <stdexcept>

namespace heliofarm::gridcast {

class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Standardizer {
  double mu = 0.0;
  double sigma = 1.0;

  double standardize(double x) const { return (x - mu) / sigma; }
  double destandardize(double z) const { return z * sigma + mu; }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// Population mean and standard deviation; throws DegenerateDataError when sigma is zero.
Standardizer fit_standardizer(std::span<const double> values);

}  // namespace heliofarm::gridcast

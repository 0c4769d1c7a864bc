#pragma once

#include <cmath>
#include <cstddef>

namespace tailcal {

/// Neumaier-compensated running sum. Totals over ~1e5 rows stay independent
/// of accumulation order to within a few ulps.
template <typename Scalar = double>
class CompensatedSum {
 public:
  CompensatedSum& operator+=(Scalar x) {
    const Scalar t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
    return *this;
  }

  Scalar value() const { return sum_ + comp_; }

 private:
  Scalar sum_{0};
  Scalar comp_{0};
};

template <typename Range>
double compensated_sum(const Range& values) {
  CompensatedSum<double> acc;
  for (double v : values) acc += v;
  return acc.value();
}

/// |a - b| / max(|b|, floor); used for all relative-tolerance checks.
inline double relative_error(double a, double b, double floor = 1e-300) {
  const double denom = std::abs(b) > floor ? std::abs(b) : floor;
  return std::abs(a - b) / denom;
}

}  // namespace tailcal

#include "selfcons/numeric.hpp"

#include <stdexcept>

namespace selfcons {

double compensated_total(std::span<const double> xs) {
  CompensatedSum<double> acc;
  for (double x : xs) acc += x;
  return acc.value();
}

double compensated_mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of an empty range");
  return compensated_total(xs) / static_cast<double>(xs.size());
}

}  // namespace selfcons

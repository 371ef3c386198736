#include "rscrub/mcd.hpp"

#include <boost/math/distributions/chi_squared.hpp>

namespace rscrub {

double mcd_consistency_factor(Index n, Index p, Index h) {
  if (n < 1 || p < 1 || h < 1 || h > n) throw PreconditionError("mcd_consistency_factor: invalid n, p, h");
  if (h == n) return 1.0;
  const double frac = static_cast<double>(h) / static_cast<double>(n);
  const double q = boost::math::quantile(boost::math::chi_squared(static_cast<double>(p)), frac);
  return frac / boost::math::cdf(boost::math::chi_squared(static_cast<double>(p + 2)), q);
}

}  // namespace rscrub

#include "nllvm/numeric.hpp"

#include <boost/math/special_functions/erf.hpp>

namespace nllvm {

double std_normal_quantile(double p)
{
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

} // namespace nllvm

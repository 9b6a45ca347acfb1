#include <cmath>

#include <boost/math/special_functions/digamma.hpp>

#include "brc/error.hpp"
#include "brc/models.hpp"

namespace brc {

CountLogPmf poisson_logpmf(int y, double mean) {
  if (y < 0) throw DataError("negative count");
  CountLogPmf out;
  out.logp = y * std::log(mean) - mean - std::lgamma(y + 1.0);
  out.d_mean = y / mean - 1.0;
  return out;
}

CountLogPmf nb1_shape_logpmf(int y, double shape, double nu) {
  if (y < 0) throw DataError("negative count");
  using boost::math::digamma;
  CountLogPmf out;
  const double log1p_nu = std::log1p(nu);
  out.logp = std::lgamma(y + shape) - std::lgamma(shape) - std::lgamma(y + 1.0) + y * std::log(nu) -
             (y + shape) * log1p_nu;
  out.d_mean = (y > 0 ? digamma(y + shape) - digamma(shape) : 0.0) - log1p_nu;
  out.d_dispersion = y / nu - (y + shape) / (1.0 + nu);
  return out;
}

CountLogPmf nb_logpmf(int y, double mean, double dispersion, Observation kind) {
  if (y < 0) throw DataError("negative count");
  using boost::math::digamma;
  switch (kind) {
    case Observation::poisson: return poisson_logpmf(y, mean);
    case Observation::nb2: {
      const double phi = dispersion;
      CountLogPmf out;
      const double log_pm = std::log(phi + mean);
      out.logp = std::lgamma(y + phi) - std::lgamma(phi) - std::lgamma(y + 1.0) + phi * (std::log(phi) - log_pm) +
                 y * (std::log(mean) - log_pm);
      out.d_mean = y / mean - (y + phi) / (phi + mean);
      out.d_dispersion = (y > 0 ? digamma(y + phi) - digamma(phi) : 0.0) + std::log(phi) - log_pm + 1.0 -
                         (y + phi) / (phi + mean);
      return out;
    }
    case Observation::nb1: {
      const double nu = dispersion;
      const double shape = mean / nu;
      const auto s = nb1_shape_logpmf(y, shape, nu);
      CountLogPmf out;
      out.logp = s.logp;
      out.d_mean = s.d_mean / nu;
      out.d_dispersion = s.d_dispersion - s.d_mean * shape / nu;
      return out;
    }
  }
  return {};
}

}  // namespace brc

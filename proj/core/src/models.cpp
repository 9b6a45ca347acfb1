#include "brc/models.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "brc/error.hpp"

namespace brc {

double Model::log_density(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  try {
    const double lp = log_posterior(theta, grad);
    if (!std::isfinite(lp)) return kNegInf;
    if (grad && !grad->allFinite()) return kNegInf;
    return lp;
  } catch (const NonFiniteError&) {
    return kNegInf;
  } catch (const std::domain_error&) {
    return kNegInf;
  } catch (const std::overflow_error&) {
    return kNegInf;
  }
}

std::vector<std::string> Model::output_names() const { return layout_.scalar_names(); }

Eigen::VectorXd Model::outputs(const Eigen::VectorXd& theta) const { return layout_.constrain(theta); }

std::unique_ptr<IndividualModel> make_model(const ModelSpec& spec, const IndividualData& data) {
  return std::make_unique<IndividualModel>(spec, data);
}

std::unique_ptr<BrcModel> make_model(const ModelSpec& spec, const BrcData& data) {
  return std::make_unique<BrcModel>(spec, data);
}

LogPosterior log_posterior(const Model& model, const Eigen::VectorXd& theta) {
  LogPosterior out;
  out.logp = model.log_posterior(theta, &out.grad);
  return out;
}

Eigen::MatrixXd predict_intensity(const IndividualModel& model, const PosteriorDraws& draws,
                                  const IndividualData& newdata, bool debias) {
  const Eigen::MatrixXd& theta = draws.unconstrained;
  if (theta.cols() != model.dim()) throw ConfigError("draws do not match the model dimension");
  Eigen::MatrixXd out(theta.rows(), newdata.rows());
  for (Eigen::Index d = 0; d < theta.rows(); ++d) {
    out.row(d) = model.predict_log_intensity(theta.row(d).transpose(), newdata, debias).array().exp().transpose();
  }
  return out;
}

}  // namespace brc

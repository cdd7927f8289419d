#include "starme/families.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <stdexcept>

namespace starme {

namespace {

constexpr double kShapeFloor = 1e-8;
constexpr double kResponseEps = 1e-10;
constexpr double kHalfLog2Pi = 0.9189385332046727417803297;

double logistic(double eta) {
  // stable on both tails
  if (eta >= 0.0) {
    double e = std::exp(-eta);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

double link_apply(LinkKind link, double eta) {
  switch (link) {
    case LinkKind::Identity:
      return eta;
    case LinkKind::Exponential:
      return std::exp(eta);
    case LinkKind::Logit:
      return logistic(eta);
  }
  return eta;
}

double link_invert(LinkKind link, double theta) {
  switch (link) {
    case LinkKind::Identity:
      return theta;
    case LinkKind::Exponential:
      if (theta <= 0.0)
        throw std::domain_error("link_invert: exponential link needs theta > 0");
      return std::log(theta);
    case LinkKind::Logit:
      if (theta <= 0.0 || theta >= 1.0)
        throw std::domain_error("link_invert: logit link needs theta in (0,1)");
      return std::log(theta) - std::log1p(-theta);
  }
  return theta;
}

BetaShape BetaShape::from_mean_scale(double mu, double sigma2) {
  double phi = 1.0 / sigma2 - 1.0;
  BetaShape s;
  s.p = std::max(mu * phi, kShapeFloor);
  s.q = std::max((1.0 - mu) * phi, kShapeFloor);
  return s;
}

const char* ResponseFamily::name() const {
  return kind_ == FamilyKind::Gaussian ? "gaussian" : "beta";
}

LinkKind ResponseFamily::link(int param) const {
  if (kind_ == FamilyKind::Gaussian)
    return param == 0 ? LinkKind::Identity : LinkKind::Exponential;
  return LinkKind::Logit;
}

bool ResponseFamily::in_support(double y) const {
  if (!std::isfinite(y)) return false;
  if (kind_ == FamilyKind::Gaussian) return true;
  return y > 0.0 && y < 1.0;
}

double ResponseFamily::clamp_response(double y) const {
  if (!in_support(y))
    throw std::domain_error(std::string("response outside ") + name() +
                            " support: " + std::to_string(y));
  if (kind_ == FamilyKind::Beta)
    return std::min(std::max(y, kResponseEps), 1.0 - kResponseEps);
  return y;
}

std::array<double, 2> ResponseFamily::apply_links(
    const std::array<double, 2>& eta) const {
  return {link_apply(link(0), eta[0]), link_apply(link(1), eta[1])};
}

double ResponseFamily::log_density(double y,
                                   const std::array<double, 2>& theta) const {
  if (kind_ == FamilyKind::Gaussian) {
    double mu = theta[0], sigma2 = theta[1];
    if (!(sigma2 > 0.0))
      throw std::domain_error("gaussian log_density: sigma2 <= 0");
    double z = y - mu;
    return -kHalfLog2Pi - 0.5 * std::log(sigma2) - 0.5 * z * z / sigma2;
  }
  double yc = clamp_response(y);
  BetaShape s = BetaShape::from_mean_scale(theta[0], theta[1]);
  return std::lgamma(s.p + s.q) - std::lgamma(s.p) - std::lgamma(s.q) +
         (s.p - 1.0) * std::log(yc) + (s.q - 1.0) * std::log1p(-yc);
}

double ResponseFamily::cdf(double y, const std::array<double, 2>& theta) const {
  if (kind_ == FamilyKind::Gaussian) {
    double mu = theta[0], sigma2 = theta[1];
    if (!(sigma2 > 0.0)) throw std::domain_error("gaussian cdf: sigma2 <= 0");
    return 0.5 * std::erfc(-(y - mu) / std::sqrt(2.0 * sigma2));
  }
  if (y <= 0.0) return 0.0;
  if (y >= 1.0) return 1.0;
  BetaShape s = BetaShape::from_mean_scale(theta[0], theta[1]);
  return boost::math::ibeta(s.p, s.q, y);
}

double ResponseFamily::sample(const std::array<double, 2>& theta,
                              Rng& rng) const {
  if (kind_ == FamilyKind::Gaussian)
    return rng.normal(theta[0], std::sqrt(theta[1]));
  BetaShape s = BetaShape::from_mean_scale(theta[0], theta[1]);
  return rng.beta(s.p, s.q);
}

void ResponseFamily::score_curvature(double y,
                                     const std::array<double, 2>& theta,
                                     int param, double& s, double& w) const {
  if (kind_ == FamilyKind::Gaussian) {
    double mu = theta[0], sigma2 = theta[1];
    double z = y - mu;
    if (param == 0) {
      s = z / sigma2;
      w = 1.0 / sigma2;
    } else {
      s = -0.5 + 0.5 * z * z / sigma2;
      w = 0.5;
    }
    return;
  }

  double yc = clamp_response(y);
  double mu = theta[0], sigma2 = theta[1];
  BetaShape sh = BetaShape::from_mean_scale(mu, sigma2);
  double p = sh.p, q = sh.q;
  double phi = p + q;
  double logit_y = std::log(yc) - std::log1p(-yc);
  if (param == 0) {
    double dmu = mu * (1.0 - mu);
    s = phi * dmu * (logit_y - (boost::math::digamma(p) - boost::math::digamma(q)));
    w = phi * phi * dmu * dmu *
        (boost::math::trigamma(p) + boost::math::trigamma(q));
  } else {
    // eta drives sigma2 through the logit link; phi = 1/sigma2 - 1
    double dl_dphi = boost::math::digamma(phi) - mu * boost::math::digamma(p) -
                     (1.0 - mu) * boost::math::digamma(q) + mu * std::log(yc) +
                     (1.0 - mu) * std::log1p(-yc);
    double dphi_deta = -(1.0 - sigma2) / sigma2;
    double fisher_phi = mu * mu * boost::math::trigamma(p) +
                        (1.0 - mu) * (1.0 - mu) * boost::math::trigamma(q) -
                        boost::math::trigamma(phi);
    s = dl_dphi * dphi_deta;
    w = fisher_phi * dphi_deta * dphi_deta;
  }
}

ResponseFamily family_from_name(const std::string& name) {
  if (name == "gaussian") return ResponseFamily(FamilyKind::Gaussian);
  if (name == "beta") return ResponseFamily(FamilyKind::Beta);
  throw std::invalid_argument("unknown family '" + name +
                              "' (allowed: gaussian, beta)");
}

}  // namespace starme

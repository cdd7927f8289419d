#pragma once

#include <array>
#include <string>

#include "starme/rng.hpp"

namespace starme {

enum class FamilyKind { Gaussian, Beta };
enum class LinkKind { Identity, Exponential, Logit };

// response function h: eta -> theta
double link_apply(LinkKind link, double eta);
// inverse h^{-1}: theta -> eta; throws std::domain_error outside the link image
double link_invert(LinkKind link, double theta);

// Shape pair (p, q) of a beta distribution and its (mean, scale)
// parametrization mu = p/(p+q), sigma2 = 1/(p+q+1). Shapes are floored at
// 1e-8 so that densities stay finite for predictors driven to the edge of
// the parameter space.
struct BetaShape {
  double p = 1.0;
  double q = 1.0;
  static BetaShape from_mean_scale(double mu, double sigma2);
  double mean() const { return p / (p + q); }
  double scale() const { return 1.0 / (p + q + 1.0); }
};

// Two-parameter response family: Gaussian (mu, sigma2) with identity and
// exponential links, or Beta (mu, sigma2) with logit links on both
// parameters. theta is always on the natural parameter scale.
class ResponseFamily {
 public:
  static constexpr int kParams = 2;

  explicit ResponseFamily(FamilyKind kind) : kind_(kind) {}

  FamilyKind kind() const { return kind_; }
  const char* name() const;
  LinkKind link(int param) const;

  bool in_support(double y) const;
  // Beta responses are pulled into [1e-10, 1-1e-10] before density work;
  // Gaussian responses pass through. Throws outside the open support.
  double clamp_response(double y) const;

  double log_density(double y, const std::array<double, 2>& theta) const;
  double cdf(double y, const std::array<double, 2>& theta) const;
  double sample(const std::array<double, 2>& theta, Rng& rng) const;

  // score s = d log f / d eta_k and expected curvature
  // w = E[-d^2 log f / d eta_k^2] at theta, for the IWLS proposal
  void score_curvature(double y, const std::array<double, 2>& theta, int param,
                       double& s, double& w) const;

  std::array<double, 2> apply_links(const std::array<double, 2>& eta) const;

 private:
  FamilyKind kind_;
};

ResponseFamily family_from_name(const std::string& name);

}  // namespace starme

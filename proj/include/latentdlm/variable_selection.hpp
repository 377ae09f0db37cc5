#pragma once

// Joint Metropolis update of the inclusion flags and the coefficients.
// A proposal flips one unlocked flag; beta is then drawn from its Gaussian
// full conditional under whichever flag vector survives, so excluded
// coefficients are exactly zero and the state never changes length.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentdlm/distributions.hpp"
#include "latentdlm/error.hpp"
#include "latentdlm/gaussian_core.hpp"
#include "latentdlm/rng.hpp"

namespace latentdlm {

struct InclusionVector {
  std::vector<bool> flags;
  std::vector<bool> locked;  // locked columns are always included

  static InclusionVector all_in(std::size_t p) { return {std::vector<bool>(p, true), std::vector<bool>(p, false)}; }

  std::size_t size() const { return flags.size(); }

  std::vector<Eigen::Index> active_indices() const {
    std::vector<Eigen::Index> out;
    for (std::size_t j = 0; j < flags.size(); ++j)
      if (flags[j]) out.push_back(static_cast<Eigen::Index>(j));
    return out;
  }

  std::vector<std::size_t> unlocked_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < locked.size(); ++j)
      if (!locked[j]) out.push_back(j);
    return out;
  }

  friend bool operator==(const InclusionVector&, const InclusionVector&) = default;
};

struct SelectionConfig {
  std::vector<double> prior_inclusion;  // per column, in (0, 1)
  bool enabled = true;

  static SelectionConfig uniform(std::size_t p, double prob = 0.5, bool enabled = true) {
    return {std::vector<double>(p, prob), enabled};
  }
};

inline void validate(const InclusionVector& gamma) {
  if (gamma.flags.size() != gamma.locked.size())
    throw ValidationError("inclusion vector: flags and locked lengths differ");
  for (std::size_t j = 0; j < gamma.size(); ++j)
    if (gamma.locked[j] && !gamma.flags[j])
      throw ValidationError("inclusion vector: locked column " + std::to_string(j) + " is excluded");
}

/// Flip one uniformly chosen unlocked flag. The proposal is symmetric.
inline InclusionVector propose_flip(const InclusionVector& gamma, RngStream& rng) {
  const auto free = gamma.unlocked_indices();
  if (free.empty()) throw ValidationError("propose_flip: every column is locked");
  InclusionVector out = gamma;
  const std::size_t j = free[rng.uniform_index(free.size())];
  out.flags[j] = !out.flags[j];
  return out;
}

/// log pi(gamma) under independent Bernoulli priors on the unlocked flags.
inline double log_inclusion_prior(const InclusionVector& gamma, const SelectionConfig& config) {
  double out = 0.0;
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    if (gamma.locked[j]) continue;
    const double p = config.prior_inclusion[j];
    out += gamma.flags[j] ? std::log(p) : std::log1p(-p);
  }
  return out;
}

/// min(0, score* - score + log pi(gamma*) - log pi(gamma)); the symmetric
/// proposal terms cancel.
inline double log_accept(const InclusionVector& gamma, const InclusionVector& gamma_star, double score,
                         double score_star, const SelectionConfig& config) {
  if (gamma == gamma_star) return 0.0;
  const double ratio =
      (score_star - score) + (log_inclusion_prior(gamma_star, config) - log_inclusion_prior(gamma, config));
  return std::min(0.0, ratio);
}

/// Moments and score for one active set, from shared cross products.
struct ActiveSetFit {
  std::vector<Eigen::Index> active;
  PosteriorMoments moments;
  double score = 0.0;
};

inline ActiveSetFit fit_active_set(const InclusionVector& gamma, const WeightedCrossProducts& cp,
                                   const GaussianPrior& prior) {
  ActiveSetFit out;
  out.active = gamma.active_indices();
  const auto k = static_cast<Eigen::Index>(out.active.size());
  Eigen::MatrixXd gram(k, k);
  Eigen::VectorXd rhs(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const Eigen::Index ia = out.active[static_cast<std::size_t>(a)];
    rhs(a) = cp.rhs(ia);
    for (Eigen::Index b = 0; b < k; ++b) gram(a, b) = cp.gram(ia, out.active[static_cast<std::size_t>(b)]);
  }
  const GaussianPrior sub = prior.restrict(out.active);
  out.moments = posterior_moments(gram, rhs, sub);
  out.score = log_marginal_score(out.moments, sub);
  return out;
}

/// Draw the full-length beta for an active set; excluded entries are 0.
inline Eigen::VectorXd draw_beta(const ActiveSetFit& fit, Eigen::Index p, RngStream& rng) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (fit.active.empty()) return beta;
  const Eigen::VectorXd sub = sample_mvn(fit.moments.M, fit.moments.chol_V, rng);
  for (std::size_t a = 0; a < fit.active.size(); ++a) beta(fit.active[a]) = sub(static_cast<Eigen::Index>(a));
  return beta;
}

struct SelectionStep {
  InclusionVector gamma;
  Eigen::VectorXd beta;
  bool proposed = false;
  bool accepted = false;
};

/// One joint (gamma, beta) update given the model's current precision
/// weights omega and working response lambda. beta is redrawn whether or
/// not the flip is accepted.
inline SelectionStep joint_update(const InclusionVector& gamma, const Eigen::MatrixXd& X, const Eigen::VectorXd& omega,
                                  const Eigen::VectorXd& lambda, const GaussianPrior& prior,
                                  const SelectionConfig& config, RngStream& rng) {
  const Eigen::Index p = X.cols();
  if (static_cast<Eigen::Index>(gamma.size()) != p || prior.size() != p)
    throw ValidationError("joint_update: inclusion vector, prior and design disagree on column count");
  const auto cp = weighted_cross_products(X, omega, lambda);

  SelectionStep step;
  const bool can_flip = config.enabled && !gamma.unlocked_indices().empty();
  if (!can_flip) {
    step.gamma = gamma;
    step.beta = draw_beta(fit_active_set(gamma, cp, prior), p, rng);
    return step;
  }

  const InclusionVector proposal = propose_flip(gamma, rng);
  const ActiveSetFit current = fit_active_set(gamma, cp, prior);
  const ActiveSetFit candidate = fit_active_set(proposal, cp, prior);
  const double la = log_accept(gamma, proposal, current.score, candidate.score, config);
  step.proposed = true;
  step.accepted = std::log(rng.uniform()) < la;
  if (step.accepted) {
    step.gamma = proposal;
    step.beta = draw_beta(candidate, p, rng);
  } else {
    step.gamma = gamma;
    step.beta = draw_beta(current, p, rng);
  }
  return step;
}

}  // namespace latentdlm

#pragma once

// Generalized linear models solved through their (weighted) score equations:
// logistic by Newton-Raphson, linear-Gaussian by weighted least squares.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fdt/dataset.hpp"
#include "fdt/error.hpp"

namespace fdt {

enum class Link { logistic, linear };

inline const char* to_string(Link l) { return l == Link::logistic ? "logistic" : "linear"; }

inline double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

struct GlmOptions {
  int max_iter = 100;
  double tol = 1e-10;               // max-norm of the mean score
  double separation_bound = 30.0;   // |coefficient| above this is separation
  double dispersion_floor = 1e-12;  // relative to the outcome variance
};

using Overrides = std::map<std::string, double>;

// Design matrix with a leading intercept column.
inline Eigen::MatrixXd design_matrix(const Dataset& data, const std::vector<std::string>& terms,
                                     const Overrides& overrides = {}) {
  for (const auto& t : terms) data.require_term(t);
  Eigen::MatrixXd X(data.n(), terms.size() + 1);
  for (std::size_t i = 0; i < data.n(); ++i) {
    X(i, 0) = 1.0;
    for (std::size_t k = 0; k < terms.size(); ++k) X(i, k + 1) = data.term(terms[k], i, overrides);
  }
  return X;
}

// Row weights: dataset frequencies times optional case weights rescaled so
// the largest is 1.
inline Eigen::VectorXd row_weights(const Dataset& data, const std::vector<double>* weights) {
  Eigen::VectorXd w(data.n());
  double top = 1.0;
  if (weights) {
    if (weights->size() != data.n()) throw ValidationError("weights: length does not match dataset");
    top = 0.0;
    for (double v : *weights) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("weights: entries must be finite and > 0");
      top = std::max(top, v);
    }
  }
  for (std::size_t i = 0; i < data.n(); ++i) w(i) = data.frequency(i) * (weights ? (*weights)[i] / top : 1.0);
  return w;
}

struct ModelFit {
  std::string outcome;
  std::vector<std::string> terms;  // predictors, intercept implied
  Link link = Link::linear;
  Eigen::VectorXd coef;            // intercept first
  double dispersion = 1.0;         // residual variance, linear only
  bool converged = false;
  int iterations = 0;
  bool weighted = false;
  std::string weight_provenance = "none";
  double loglik = 0.0;

  double linear_predictor(const Dataset& data, std::size_t row, const Overrides& overrides = {}) const {
    double eta = coef(0);
    for (std::size_t k = 0; k < terms.size(); ++k) eta += coef(k + 1) * data.term(terms[k], row, overrides);
    return eta;
  }

  double mean(const Dataset& data, std::size_t row, const Overrides& overrides = {}) const {
    double eta = linear_predictor(data, row, overrides);
    return link == Link::logistic ? expit(eta) : eta;
  }

  // Probability mass (logistic) or Gaussian density (linear) of `y`.
  double density(const Dataset& data, std::size_t row, double y, const Overrides& overrides = {}) const {
    double mu = mean(data, row, overrides);
    if (link == Link::logistic) return y == 1.0 ? mu : 1.0 - mu;
    double r = y - mu;
    if (dispersion == 0.0) return std::abs(r) <= 1e-9 * (1.0 + std::abs(y)) ? 1.0 : 0.0;
    return std::exp(-0.5 * r * r / dispersion) / std::sqrt(2.0 * M_PI * dispersion);
  }

  double coefficient(const std::string& term) const {
    for (std::size_t k = 0; k < terms.size(); ++k)
      if (terms[k] == term) return coef(k + 1);
    throw ValidationError("model has no term " + term);
  }

  nlohmann::ordered_json summary() const {
    nlohmann::ordered_json j;
    j["outcome"] = outcome;
    j["link"] = to_string(link);
    std::vector<std::string> names{"(intercept)"};
    names.insert(names.end(), terms.begin(), terms.end());
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < names.size(); ++k) c[names[k]] = coef(k);
    j["coefficients"] = c;
    if (link == Link::linear) j["dispersion"] = dispersion;
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["weights"] = weight_provenance;
    return j;
  }
};

namespace detail {

inline double logistic_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log(1 + e^eta) evaluated stably
    double softplus = eta(i) > 0 ? eta(i) + std::log1p(std::exp(-eta(i))) : std::log1p(std::exp(eta(i)));
    ll += w(i) * (y(i) * eta(i) - softplus);
  }
  return ll;
}

inline Eigen::VectorXd logistic_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                      const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r(i) = w(i) * (y(i) - expit(eta(i)));
  return X.transpose() * r;
}

inline Eigen::VectorXd column_vector(const Dataset& data, const std::string& name) {
  const auto& c = data.column(name);
  return Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

inline void check_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  Eigen::MatrixXd Xw = w.cwiseSqrt().asDiagonal() * X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) throw FitError("singular design matrix");
}

}  // namespace detail

// Weighted log-likelihood and score of a GLM at arbitrary coefficients, with
// the same row weighting as fit_glm.
inline double glm_loglik(const Dataset& data, const std::string& outcome, const std::vector<std::string>& terms,
                         Link link, const Eigen::VectorXd& beta, const std::vector<double>* weights = nullptr,
                         double dispersion = 1.0) {
  Eigen::MatrixXd X = design_matrix(data, terms);
  Eigen::VectorXd y = detail::column_vector(data, outcome);
  Eigen::VectorXd w = row_weights(data, weights);
  if (link == Link::logistic) return detail::logistic_loglik(X, y, w, beta);
  Eigen::VectorXd r = y - X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    ll += w(i) * (-0.5 * std::log(2.0 * M_PI * dispersion) - 0.5 * r(i) * r(i) / dispersion);
  return ll;
}

// Score of the log-likelihood; for the linear model this is X'W(y - X beta)
// divided by the dispersion.
inline Eigen::VectorXd glm_score(const Dataset& data, const std::string& outcome,
                                 const std::vector<std::string>& terms, Link link, const Eigen::VectorXd& beta,
                                 const std::vector<double>* weights = nullptr, double dispersion = 1.0) {
  Eigen::MatrixXd X = design_matrix(data, terms);
  Eigen::VectorXd y = detail::column_vector(data, outcome);
  Eigen::VectorXd w = row_weights(data, weights);
  if (link == Link::logistic) return detail::logistic_score(X, y, w, beta);
  return X.transpose() * (w.asDiagonal() * (y - X * beta)) / dispersion;
}

inline ModelFit fit_glm(const Dataset& data, const std::string& outcome, const std::vector<std::string>& terms,
                        Link link, const std::vector<double>* weights = nullptr,
                        const std::string& provenance = "none", const GlmOptions& opt = {}) {
  if (!data.has(outcome)) throw ValidationError("fit_glm: unknown outcome column " + outcome);
  for (const auto& t : terms) {
    data.require_term(t);
    std::stringstream ss(t);
    for (std::string part; std::getline(ss, part, ':');)
      if (part == outcome) throw ValidationError("fit_glm: predictors include the outcome " + outcome);
  }
  if (link == Link::logistic && !data.is_binary(outcome))
    throw ValidationError("fit_glm: logistic model needs a binary outcome, " + outcome + " is not");

  ModelFit fit;
  fit.outcome = outcome;
  fit.terms = terms;
  fit.link = link;
  fit.weighted = weights != nullptr;
  fit.weight_provenance = weights ? provenance : "none";

  const Eigen::MatrixXd X = design_matrix(data, terms);
  const Eigen::VectorXd y = detail::column_vector(data, outcome);
  const Eigen::VectorXd w = row_weights(data, weights);
  const double wsum = w.sum();
  const Eigen::Index p = X.cols();
  if (!(wsum > 0.0)) throw FitError("fit_glm: total weight is zero");
  std::size_t support = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) support += w(i) > 0.0;
  if (support < static_cast<std::size_t>(p) + 1) throw FitError("fit_glm: insufficient data for " + outcome + " model");
  detail::check_rank(X, w);

  if (link == Link::linear) {
    Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    Eigen::VectorXd yw = sw.asDiagonal() * y;
    fit.coef = Xw.colPivHouseholderQr().solve(yw);
    // one refinement step on the normal equations
    Eigen::VectorXd resid = y - X * fit.coef;
    fit.coef += (Xw.transpose() * Xw).ldlt().solve(X.transpose() * (w.asDiagonal() * resid));
    resid = y - X * fit.coef;
    double ybar = w.dot(y) / wsum;
    double yvar = w.dot((y.array() - ybar).square().matrix()) / wsum;
    fit.dispersion = w.dot(resid.cwiseProduct(resid)) / wsum;
    fit.iterations = 1;
    fit.converged = (X.transpose() * (w.asDiagonal() * resid)).cwiseAbs().maxCoeff() / wsum <=
                    std::max(opt.tol, 1e-12 * std::sqrt(yvar + 1.0));
    if (yvar == 0.0) {
      // constant outcome: a point mass at the fitted intercept
      fit.dispersion = 0.0;
      fit.converged = true;
      fit.loglik = std::numeric_limits<double>::infinity();
      return fit;
    }
    if (opt.dispersion_floor > 0.0 && !(fit.dispersion > opt.dispersion_floor * yvar))
      throw FitError("fit_glm: residual variance of " + outcome + " model is below the numerical floor");
    if (!fit.converged) throw FitError("fit_glm: least squares did not reach the score tolerance");
    fit.loglik = glm_loglik(data, outcome, terms, link, fit.coef, weights, fit.dispersion);
    return fit;
  }

  double ybar = w.dot(y) / wsum;
  if (ybar <= 0.0 || ybar >= 1.0) throw FitError("fit_glm: separation, outcome " + outcome + " is constant");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta(0) = std::log(ybar / (1.0 - ybar));
  double ll = detail::logistic_loglik(X, y, w, beta);
  for (int it = 1; it <= opt.max_iter; ++it) {
    Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd r(eta.size()), v(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      double mu = expit(eta(i));
      r(i) = w(i) * (y(i) - mu);
      v(i) = w(i) * mu * (1.0 - mu);
    }
    Eigen::VectorXd score = X.transpose() * r;
    if (score.cwiseAbs().maxCoeff() / wsum < opt.tol) {
      // one polishing step; quadratic convergence takes it to rounding level
      Eigen::MatrixXd info = X.transpose() * v.asDiagonal() * X;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        Eigen::VectorXd polished = beta + ldlt.solve(score);
        Eigen::VectorXd polished_score = detail::logistic_score(X, y, w, polished);
        if (polished_score.cwiseAbs().maxCoeff() < score.cwiseAbs().maxCoeff()) {
          beta = polished;
          ll = detail::logistic_loglik(X, y, w, beta);
        }
      }
      fit.coef = beta;
      fit.converged = true;
      fit.iterations = it - 1;
      fit.loglik = ll;
      return fit;
    }
    Eigen::MatrixXd info = X.transpose() * v.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw FitError("fit_glm: information matrix is singular");
    Eigen::VectorXd step = ldlt.solve(score);
    double scale = 1.0;
    Eigen::VectorXd next = beta + step;
    double ll_next = detail::logistic_loglik(X, y, w, next);
    for (int h = 0; h < 30 && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++h) {
      scale *= 0.5;
      next = beta + scale * step;
      ll_next = detail::logistic_loglik(X, y, w, next);
    }
    beta = next;
    ll = ll_next;
    if (beta.cwiseAbs().maxCoeff() > opt.separation_bound)
      throw FitError("fit_glm: separation, coefficients of " + outcome + " model diverge");
  }
  throw FitError("fit_glm: no convergence after " + std::to_string(opt.max_iter) + " iterations");
}

// Sandwich covariance A^-1 B A^-1 of the coefficients with case weights held
// fixed: A = sum_i f_i w_i v_i x_i x_i', B = sum_i f_i (w_i e_i)^2 x_i x_i'.
// Frequencies count as repeated rows. Invariant to rescaling the weights.
inline Eigen::MatrixXd sandwich_covariance(const Dataset& data, const ModelFit& fit,
                                           const std::vector<double>* weights = nullptr) {
  const Eigen::MatrixXd X = design_matrix(data, fit.terms);
  const Eigen::VectorXd y = detail::column_vector(data, fit.outcome);
  const Eigen::Index p = X.cols();
  double top = 1.0;
  if (weights) top = *std::max_element(weights->begin(), weights->end());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p), B = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < data.n(); ++i) {
    double f = data.frequency(i);
    if (f == 0.0) continue;
    double wi = weights ? (*weights)[i] / top : 1.0;
    double eta = X.row(i).dot(fit.coef);
    double mu = fit.link == Link::logistic ? expit(eta) : eta;
    double v = fit.link == Link::logistic ? mu * (1.0 - mu) : 1.0;
    double e = y(i) - mu;
    Eigen::VectorXd x = X.row(i).transpose();
    A.noalias() += (f * wi * v) * x * x.transpose();
    B.noalias() += (f * wi * wi * e * e) * x * x.transpose();
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw FitError("sandwich: bread matrix is singular");
  Eigen::MatrixXd Ainv = lu.inverse();
  return Ainv * B * Ainv.transpose();
}

}  // namespace fdt

#pragma once

// Nuisance models, primal and dual weights, and effect estimators for the
// anchored front-door model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdt/dataset.hpp"
#include "fdt/discrete.hpp"
#include "fdt/glm.hpp"
#include "fdt/identification.hpp"
#include "fdt/parallel.hpp"
#include "fdt/rng.hpp"
#include "fdt/roles.hpp"

namespace fdt {

struct WeightVector {
  std::vector<double> values;
  std::string provenance = "none";  // primal | dual | resampling | none
  std::optional<double> a;          // reference treatment value for dual weights

  void validate(std::size_t n) const {
    if (values.size() != n) throw ValidationError("weights: length does not match dataset");
    for (double v : values)
      if (!(v > 0.0) || !std::isfinite(v)) throw PositivityError("weights: entries must be finite and > 0");
  }
};

// Predictor terms for each nuisance model. Terms are column names or
// ':'-joined products.
struct NuisanceSpec {
  std::vector<std::string> a_terms;               // p(A | Z, C)
  std::vector<std::string> y_terms;               // p(Y | Z, A, M, C)
  std::vector<std::vector<std::string>> m_terms;  // p(M_k | Z, A, C, M_<k)

  // Main effects plus the Z:A interaction in the outcome and mediator models.
  static NuisanceSpec defaults(const RoleAssignment& r) {
    NuisanceSpec s;
    s.a_terms = r.c;
    s.a_terms.push_back(r.z);
    s.y_terms = r.c;
    for (const auto& t : {r.z, r.a, r.z + ":" + r.a}) s.y_terms.push_back(t);
    s.y_terms.insert(s.y_terms.end(), r.m.begin(), r.m.end());
    for (std::size_t k = 0; k < r.m.size(); ++k) {
      std::vector<std::string> t = r.c;
      for (const auto& x : {r.z, r.a, r.z + ":" + r.a}) t.push_back(x);
      t.insert(t.end(), r.m.begin(), r.m.begin() + k);
      s.m_terms.push_back(t);
    }
    return s;
  }

  // Every interaction of the conditioning variables: exact for binary data.
  static NuisanceSpec saturated(const RoleAssignment& r) {
    auto all_products = [](const std::vector<std::string>& vars) {
      std::vector<std::string> out;
      for (std::size_t mask = 1; mask < (std::size_t{1} << vars.size()); ++mask) {
        std::string t;
        for (std::size_t k = 0; k < vars.size(); ++k)
          if (mask & (std::size_t{1} << k)) t += (t.empty() ? "" : ":") + vars[k];
        out.push_back(t);
      }
      return out;
    };
    NuisanceSpec s;
    std::vector<std::string> cz = r.c;
    cz.push_back(r.z);
    s.a_terms = all_products(cz);
    std::vector<std::string> cza = cz;
    cza.push_back(r.a);
    std::vector<std::string> full = cza;
    full.insert(full.end(), r.m.begin(), r.m.end());
    s.y_terms = all_products(full);
    for (std::size_t k = 0; k < r.m.size(); ++k) {
      std::vector<std::string> v = cza;
      v.insert(v.end(), r.m.begin(), r.m.begin() + k);
      s.m_terms.push_back(all_products(v));
    }
    return s;
  }
};

// One row per cell of an exact table, with the cell probability as the row
// frequency.
inline Dataset table_dataset(const DiscreteJoint& joint) {
  std::vector<std::vector<double>> cols(joint.names().size());
  for (std::size_t c = 0; c < joint.cells(); ++c) {
    auto idx = joint.decode(c);
    for (std::size_t k = 0; k < idx.size(); ++k) cols[k].push_back(joint.support(k)[idx[k]]);
  }
  return Dataset(joint.names(), std::move(cols), joint.probs());
}

inline Link link_for(const Dataset& data, const std::string& column) {
  return data.is_binary(column) ? Link::logistic : Link::linear;
}

inline void require_binary_treatment(const Dataset& data, const RoleAssignment& r) {
  if (!data.is_binary(r.a)) throw ValidationError("treatment " + r.a + " must be binary (0/1)");
}

inline ModelFit fit_treatment_model(const Dataset& data, const RoleAssignment& r, const NuisanceSpec& s) {
  require_binary_treatment(data, r);
  return fit_glm(data, r.a, s.a_terms, Link::logistic);
}

inline ModelFit fit_outcome_model(const Dataset& data, const RoleAssignment& r, const NuisanceSpec& s) {
  return fit_glm(data, r.y, s.y_terms, link_for(data, r.y));
}

inline std::vector<ModelFit> fit_mediator_models(const Dataset& data, const RoleAssignment& r, const NuisanceSpec& s) {
  if (s.m_terms.size() != r.m.size()) throw ValidationError("nuisance spec: one mediator model per mediator");
  std::vector<ModelFit> out;
  for (std::size_t k = 0; k < r.m.size(); ++k)
    out.push_back(fit_glm(data, r.m[k], s.m_terms[k], link_for(data, r.m[k])));
  return out;
}

// 1 / q~(A | Y, Z, M, C) per row.
inline WeightVector primal_weights(const Dataset& data, const RoleAssignment& r, const ModelFit& a_fit,
                                   const ModelFit& y_fit) {
  require_binary_treatment(data, r);
  if (!a_fit.converged || !y_fit.converged) throw FitError("primal weights: nuisance fits did not converge");
  const auto& A = data.column(r.a);
  const auto& Y = data.column(r.y);
  WeightVector w;
  w.provenance = "primal";
  w.values.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    double p1 = a_fit.mean(data, i);
    double k0 = (1.0 - p1) * y_fit.density(data, i, Y[i], {{r.a, 0.0}});
    double k1 = p1 * y_fit.density(data, i, Y[i], {{r.a, 1.0}});
    double den = A[i] == 1.0 ? k1 : k0;
    if (!(den > 0.0)) throw PositivityError("primal weights: zero nested propensity at row " + std::to_string(i));
    w.values[i] = (k0 + k1) / den;
  }
  return w;
}

// p(M | A=a, Z, C) / p(M | A, Z, C) per row, mediators factored in order.
inline WeightVector dual_weights(const Dataset& data, const RoleAssignment& r, const std::vector<ModelFit>& m_fits,
                                 double a) {
  if (m_fits.size() != r.m.size()) throw ValidationError("dual weights: one mediator model per mediator");
  for (const auto& f : m_fits)
    if (!f.converged) throw FitError("dual weights: mediator fit did not converge");
  WeightVector w;
  w.provenance = "dual";
  w.a = a;
  w.values.assign(data.n(), 1.0);
  const auto& A = data.column(r.a);
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (A[i] == a) continue;
    double ratio = 1.0;
    for (std::size_t k = 0; k < r.m.size(); ++k) {
      double m = data.column(r.m[k])[i];
      double num = m_fits[k].density(data, i, m, {{r.a, a}});
      double den = m_fits[k].density(data, i, m);
      if (!(den > 0.0)) throw PositivityError("dual weights: zero mediator density at row " + std::to_string(i));
      ratio *= num / den;
    }
    if (!(ratio > 0.0) || !std::isfinite(ratio))
      throw PositivityError("dual weights: degenerate density ratio at row " + std::to_string(i));
    w.values[i] = ratio;
  }
  return w;
}

// Clips weights at empirical percentiles (defaults 0.5 and 99.5).
inline WeightVector clip_weights(WeightVector w, double lo_pct = 0.5, double hi_pct = 99.5) {
  if (w.values.empty()) return w;
  std::vector<double> sorted = w.values;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double pct) {
    double h = (sorted.size() - 1) * pct / 100.0;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
  };
  double lo = quantile(lo_pct), hi = quantile(hi_pct);
  for (double& v : w.values) v = std::clamp(v, lo, hi);
  return w;
}

enum class Method { primal_ipw, dual_ipw, iv_wald, plugin };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::primal_ipw: return "primal-ipw";
    case Method::dual_ipw: return "dual-ipw";
    case Method::iv_wald: return "iv-wald";
    default: return "plugin";
  }
}

inline Method parse_method(const std::string& s) {
  if (s == "primal-ipw" || s == "primal") return Method::primal_ipw;
  if (s == "dual-ipw" || s == "dual") return Method::dual_ipw;
  if (s == "iv" || s == "iv-wald") return Method::iv_wald;
  if (s == "plugin") return Method::plugin;
  throw ValidationError("unknown estimation method '" + s + "'");
}

struct EstimateReport {
  std::string estimand;
  std::string method;
  double estimate = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  int B = 0;
  std::uint64_t seed = 0;
  int failed_replicates = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["estimand"] = estimand;
    j["method"] = method;
    j["estimate"] = estimate;
    if (B > 0) {
      j["ci"] = {ci_lo, ci_hi};
      j["seed"] = seed;
    } else {
      j["ci"] = nullptr;
      j["seed"] = nullptr;
    }
    j["B"] = B;
    j["failed_replicates"] = failed_replicates;
    return j;
  }
};

namespace detail {

inline double frequency_mean(const Dataset& data, const std::vector<double>& values) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) s += data.frequency(i) * values[i];
  return s / data.total_frequency();
}

inline EstimateReport point_report(std::string estimand, Method m, double v) {
  EstimateReport rep;
  rep.estimand = std::move(estimand);
  rep.method = to_string(m);
  rep.estimate = rep.ci_lo = rep.ci_hi = v;
  return rep;
}

inline std::string do_label(const RoleAssignment& r, double a) {
  std::ostringstream s;
  s << "E[" << r.y << "|do(" << r.a << "=" << a << ")]";
  return s.str();
}

}  // namespace detail

// P_n[ 1(A = a) w Y ]
inline double primal_ipw_mean(const Dataset& data, const RoleAssignment& r, double a, const WeightVector& w) {
  if (w.provenance != "primal") throw ValidationError("primal_ipw: weights must be primal weights");
  w.validate(data.n());
  const auto& A = data.column(r.a);
  const auto& Y = data.column(r.y);
  std::vector<double> terms(data.n(), 0.0);
  double arm = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i)
    if (A[i] == a) {
      terms[i] = w.values[i] * Y[i];
      arm += data.frequency(i);
    }
  if (arm == 0.0) throw PositivityError("primal_ipw: no rows with treatment value a");
  return detail::frequency_mean(data, terms);
}

// P_n[ p(M | a, Z, C) / p(M | A, Z, C) Y ]
inline double dual_ipw_mean(const Dataset& data, const RoleAssignment& r, double a,
                            const std::vector<ModelFit>& m_fits) {
  WeightVector w = dual_weights(data, r, m_fits, a);
  const auto& Y = data.column(r.y);
  std::vector<double> terms(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) terms[i] = w.values[i] * Y[i];
  return detail::frequency_mean(data, terms);
}

// {E[Y|Z=1] - E[Y|Z=0]} / {E[A|Z=1] - E[A|Z=0]}
inline double iv_wald_effect(const Dataset& data, const RoleAssignment& r, double weak_threshold = 1e-3) {
  if (!data.is_binary(r.z) || !data.is_binary(r.a)) throw ValidationError("iv_wald: Z and A must be binary");
  const auto& Z = data.column(r.z);
  const auto& A = data.column(r.a);
  const auto& Y = data.column(r.y);
  double n[2] = {0, 0}, sa[2] = {0, 0}, sy[2] = {0, 0};
  for (std::size_t i = 0; i < data.n(); ++i) {
    int z = static_cast<int>(Z[i]);
    double f = data.frequency(i);
    n[z] += f;
    sa[z] += f * A[i];
    sy[z] += f * Y[i];
  }
  if (n[0] == 0.0 || n[1] == 0.0) throw ValidationError("iv_wald: an instrument arm is empty");
  double da = sa[1] / n[1] - sa[0] / n[0];
  if (std::abs(da) < weak_threshold) throw StatisticalError("iv_wald: weak instrument, |E[A|Z=1]-E[A|Z=0]| below threshold");
  return (sy[1] / n[1] - sy[0] / n[0]) / da;
}

// sum_{c,z,m} p(c,z) p(m|a,z,c) sum_a' p(a'|z,c) E[Y|c,z,a',m] on an exact table.
inline double plugin_gformula(const DiscreteJoint& joint, const RoleAssignment& r, double a) {
  return id_functional_evaluate(joint, r, a).mean_via_gformula;
}

// Same functional with empirical frequencies; C, Z, A and M must be binary.
inline double plugin_gformula(const Dataset& data, const RoleAssignment& r, double a) {
  std::vector<std::string> disc = r.c;
  disc.push_back(r.z);
  disc.push_back(r.a);
  disc.insert(disc.end(), r.m.begin(), r.m.end());
  for (const auto& v : disc)
    if (!data.is_binary(v)) throw ValidationError("plugin: " + v + " must be binary");
  const std::size_t nc = r.c.size(), nm = r.m.size();
  // cell key bits: c..., z, a, m...
  const std::size_t cells = std::size_t{1} << disc.size();
  std::vector<double> count(cells, 0.0), ysum(cells, 0.0);
  const auto& Y = data.column(r.y);
  for (std::size_t i = 0; i < data.n(); ++i) {
    std::size_t key = 0;
    for (const auto& v : disc) key = key * 2 + static_cast<std::size_t>(data.column(v)[i]);
    count[key] += data.frequency(i);
    ysum[key] += data.frequency(i) * Y[i];
  }
  const std::size_t mcells = std::size_t{1} << nm;
  auto key_of = [&](std::size_t cz, std::size_t av, std::size_t m) { return ((cz * 2 + av) << nm) | m; };
  const double total = data.total_frequency();
  const std::size_t av = static_cast<std::size_t>(a);
  if (a != 0.0 && a != 1.0) throw ValidationError("plugin: treatment value must be 0 or 1");
  double out = 0.0;
  for (std::size_t cz = 0; cz < (std::size_t{1} << (nc + 1)); ++cz) {
    double n_cz = 0.0, n_cza[2] = {0.0, 0.0};
    for (std::size_t a2 = 0; a2 < 2; ++a2)
      for (std::size_t m = 0; m < mcells; ++m) n_cza[a2] += count[key_of(cz, a2, m)];
    n_cz = n_cza[0] + n_cza[1];
    if (n_cz == 0.0) continue;
    if (n_cza[av] == 0.0) throw PositivityError("plugin: no rows with A=a in a covariate/anchor stratum");
    for (std::size_t m = 0; m < mcells; ++m) {
      double p_m = count[key_of(cz, av, m)] / n_cza[av];
      if (p_m == 0.0) continue;
      double inner = 0.0;
      for (std::size_t a2 = 0; a2 < 2; ++a2) {
        if (n_cza[a2] == 0.0) continue;
        double c = count[key_of(cz, a2, m)];
        if (c == 0.0) throw PositivityError("plugin: empty outcome cell");
        inner += n_cza[a2] / n_cz * ysum[key_of(cz, a2, m)] / c;
      }
      out += n_cz / total * p_m * inner;
    }
  }
  return out;
}

struct EstimateConfig {
  Method method = Method::primal_ipw;
  double a1 = 1.0, a0 = 0.0;
  int B = 0;
  std::uint64_t seed = 0;
  bool clip = false;
  double weak_iv_threshold = 1e-3;
  std::optional<NuisanceSpec> models;  // defaults when unset
};

// Point estimate of E[Y|do(a1)] - E[Y|do(a0)], refitting every nuisance model.
inline double effect_estimate(const Dataset& data, const RoleAssignment& r, const EstimateConfig& cfg) {
  const NuisanceSpec spec = cfg.models ? *cfg.models : NuisanceSpec::defaults(r);
  switch (cfg.method) {
    case Method::primal_ipw: {
      auto a_fit = fit_treatment_model(data, r, spec);
      auto y_fit = fit_outcome_model(data, r, spec);
      WeightVector w = primal_weights(data, r, a_fit, y_fit);
      if (cfg.clip) w = clip_weights(w);
      return primal_ipw_mean(data, r, cfg.a1, w) - primal_ipw_mean(data, r, cfg.a0, w);
    }
    case Method::dual_ipw: {
      auto m_fits = fit_mediator_models(data, r, spec);
      if (!cfg.clip) return dual_ipw_mean(data, r, cfg.a1, m_fits) - dual_ipw_mean(data, r, cfg.a0, m_fits);
      double out = 0.0;
      for (double a : {cfg.a1, cfg.a0}) {
        WeightVector w = clip_weights(dual_weights(data, r, m_fits, a));
        std::vector<double> t(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) t[i] = w.values[i] * data.column(r.y)[i];
        out += (a == cfg.a1 ? 1.0 : -1.0) * detail::frequency_mean(data, t);
      }
      return out;
    }
    case Method::iv_wald: {
      double sign = cfg.a1 == 1.0 && cfg.a0 == 0.0 ? 1.0 : (cfg.a1 == 0.0 && cfg.a0 == 1.0 ? -1.0 : 0.0);
      if (sign == 0.0) throw ValidationError("iv_wald: contrast must compare treatment values 1 and 0");
      return sign * iv_wald_effect(data, r, cfg.weak_iv_threshold);
    }
    default:
      return plugin_gformula(data, r, cfg.a1) - plugin_gformula(data, r, cfg.a0);
  }
}

struct BootstrapResult {
  std::vector<double> replicates;  // successful replicates, in replicate order
  int failed = 0;
  double lo = 0.0, hi = 0.0;
};

// Type-7 sample quantile.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw StatisticalError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  double h = (v.size() - 1) * q;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

// Row-resampling percentile bootstrap. Replicate b draws its rows from
// Rng(derive_seed(seed, b)), so results do not depend on scheduling.
template <class Estimator>
BootstrapResult bootstrap(Estimator&& estimator, const Dataset& data, int B, std::uint64_t seed) {
  if (B < 1) throw ValidationError("bootstrap: B must be >= 1");
  if (data.weighted_rows()) throw ValidationError("bootstrap: dataset rows carry frequencies");
  std::vector<std::optional<double>> reps(B);
  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    std::vector<std::size_t> rows(data.n());
    for (auto& i : rows) i = rng.index(data.n());
    try {
      double v = estimator(data.take(rows));
      if (std::isfinite(v)) reps[b] = v;
    } catch (const Error&) {
    }
  });
  BootstrapResult out;
  for (const auto& r : reps) {
    if (r)
      out.replicates.push_back(*r);
    else
      ++out.failed;
  }
  if (2 * out.failed > B) throw StatisticalError("bootstrap: more than half of the replicates failed");
  out.lo = quantile(out.replicates, 0.025);
  out.hi = quantile(out.replicates, 0.975);
  return out;
}

inline EstimateReport estimate_effect(const Dataset& data, const RoleAssignment& r, const EstimateConfig& cfg) {
  r.validate();
  for (const auto& v : r.all())
    if (!data.has(v)) throw ValidationError("roles: unknown role column " + v);
  std::ostringstream label;
  label << detail::do_label(r, cfg.a1) << " - " << detail::do_label(r, cfg.a0);
  EstimateReport rep = detail::point_report(label.str(), cfg.method, effect_estimate(data, r, cfg));
  rep.B = cfg.B;
  rep.seed = cfg.seed;
  if (cfg.B > 0) {
    auto boot = bootstrap([&](const Dataset& d) { return effect_estimate(d, r, cfg); }, data, cfg.B, cfg.seed);
    rep.ci_lo = boot.lo;
    rep.ci_hi = boot.hi;
    rep.failed_replicates = boot.failed;
  }
  return rep;
}

// Single-arm reports matching the estimator definitions.
inline EstimateReport primal_ipw(const Dataset& data, const RoleAssignment& r, double a, const WeightVector& w) {
  return detail::point_report(detail::do_label(r, a), Method::primal_ipw, primal_ipw_mean(data, r, a, w));
}

inline EstimateReport dual_ipw(const Dataset& data, const RoleAssignment& r, double a,
                               const std::vector<ModelFit>& m_fits) {
  return detail::point_report(detail::do_label(r, a), Method::dual_ipw, dual_ipw_mean(data, r, a, m_fits));
}

inline EstimateReport iv_wald(const Dataset& data, const RoleAssignment& r, double weak_threshold = 1e-3) {
  return detail::point_report(detail::do_label(r, 1) + " - " + detail::do_label(r, 0), Method::iv_wald,
                              iv_wald_effect(data, r, weak_threshold));
}

}  // namespace fdt

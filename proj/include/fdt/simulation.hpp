#pragma once

// Hidden-variable data-generating processes for the anchored front-door
// experiments, an intervention oracle for the true effect, and the task
// runners.

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
#include "fdt/estimation.hpp"
#include "fdt/glm.hpp"
#include "fdt/parallel.hpp"
#include "fdt/rng.hpp"
#include "fdt/verma_tests.hpp"

namespace fdt {

inline const std::vector<std::string>& dgp_ids() {
  static const std::vector<std::string> ids{"a",           "b",           "c",           "d",    "a-nonlinear",
                                            "b-nonlinear", "c-nonlinear", "d-nonlinear", "iv-fd", "a-covariates"};
  return ids;
}

struct DgpSpec {
  std::string id = "a";
  std::map<std::string, double> beta;  // empty: draw every coefficient from Uniform(1, 2)
};

namespace detail {

inline std::string dgp_base(const std::string& id) {
  for (const auto& known : dgp_ids())
    if (known == id) return id.substr(0, id.find('-') == std::string::npos ? id.size() : id.find('-'));
  throw ValidationError("unknown dgp '" + id + "'");
}

inline bool dgp_nonlinear(const std::string& id) { return id.find("-nonlinear") != std::string::npos; }
inline bool dgp_covariates(const std::string& id) { return id == "a-covariates"; }
inline bool dgp_instrument(const std::string& id) { return id == "iv-fd"; }

}  // namespace detail

// Coefficient names used by a design, in draw order.
inline std::vector<std::string> dgp_coefficients(const std::string& id) {
  const std::string base = detail::dgp_base(id);
  std::vector<std::string> out{"ZA", "U1A", "U2A", "AM", "U1Y", "U2Y", "MY"};
  if (base == "b") {
    for (const char* s : {"U3Z", "U4Z", "U3M", "U4M"}) out.push_back(s);
  } else if (!detail::dgp_instrument(id)) {
    out.push_back("ZM");
  }
  if (base == "c") {
    out.push_back("U1M");
    out.push_back("U2M");
  }
  if (base == "d") out.push_back("AY");
  if (detail::dgp_nonlinear(id)) out.push_back("ZAM");
  if (detail::dgp_covariates(id))
    for (const char* s : {"C1Z", "C2Z", "C1A", "C2A", "C1M", "C2M", "C1Y", "C2Y"}) out.push_back(s);
  return out;
}

inline DgpSpec draw_dgp(const std::string& id, Rng& rng) {
  DgpSpec spec;
  spec.id = id;
  for (const auto& name : dgp_coefficients(id)) spec.beta[name] = rng.uniform(1.0, 2.0);
  return spec;
}

namespace detail {

struct Coefs {
  std::map<std::string, double> b;
  double operator()(const std::string& k) const {
    auto it = b.find(k);
    return it == b.end() ? 0.0 : it->second;
  }
};

inline Coefs resolve(const DgpSpec& spec, std::uint64_t seed) {
  Coefs c;
  if (!spec.beta.empty()) {
    for (const auto& name : dgp_coefficients(spec.id)) {
      auto it = spec.beta.find(name);
      if (it == spec.beta.end()) throw ValidationError("dgp " + spec.id + ": missing coefficient " + name);
      c.b[name] = it->second;
    }
    return c;
  }
  Rng rng(derive_seed(seed, 0xC0EFULL));
  c.b = draw_dgp(spec.id, rng).beta;
  return c;
}

// Exogenous draws for one unit; treatment-dependent parts are evaluated by
// `unit_outcomes` so that natural and intervened worlds share randomness.
struct Exogenous {
  double u1 = 0, u2 = 0, u3 = 0, u4 = 0, c1 = 0, c2 = 0, z = 0;
  double ua = 0, um = 0, ey = 0;
};

inline Exogenous draw_exogenous(const std::string& id, Rng& rng, const Coefs& b) {
  const std::string base = dgp_base(id);
  Exogenous e;
  e.u1 = rng.uniform(-1.0, 1.0);
  e.u2 = rng.bernoulli(expit(0.5)) ? 1.0 : 0.0;
  if (base == "b") {
    e.u3 = rng.uniform(-1.0, 1.0);
    e.u4 = rng.bernoulli(expit(0.5)) ? 1.0 : 0.0;
  }
  if (dgp_covariates(id)) {
    e.c1 = rng.normal();
    e.c2 = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  double zlogit = 0.5;
  if (base == "b") zlogit += b("U3Z") * e.u3 - b("U4Z") * e.u4;
  if (dgp_covariates(id)) zlogit += 0.5 * (b("C1Z") * e.c1 - b("C2Z") * e.c2);
  e.z = rng.uniform() < expit(zlogit) ? 1.0 : 0.0;
  e.ua = rng.uniform();
  e.um = rng.uniform();
  e.ey = rng.normal();
  return e;
}

inline double treatment_logit(const std::string& id, const Exogenous& e, const Coefs& b) {
  double l = -0.5 + b("ZA") * e.z - b("U1A") * e.u1 + b("U2A") * e.u2;
  if (dgp_covariates(id)) l += 0.5 * (b("C1A") * e.c1 + b("C2A") * e.c2);
  return l;
}

inline double mediator_logit(const std::string& id, const Exogenous& e, double a, const Coefs& b) {
  const std::string base = dgp_base(id);
  if (dgp_instrument(id)) return -1.0 + b("AM") * a;
  double l = -0.5 + b("AM") * a;
  if (base == "b")
    l += -b("U3M") * e.u3 + b("U4M") * e.u4;
  else
    l += -b("ZM") * e.z;
  if (base == "c") l += b("U1M") * e.u1 - b("U2M") * e.u2;
  if (dgp_nonlinear(id)) l += b("ZAM") * e.z * a;
  if (dgp_covariates(id)) l += 0.5 * (b("C1M") * e.c1 - b("C2M") * e.c2);
  return l;
}

inline double outcome_value(const std::string& id, const Exogenous& e, double a, double m, const Coefs& b) {
  double y = b("U1Y") * e.u1 + b("U2Y") * e.u2 - b("MY") * m + e.ey;
  if (dgp_base(id) == "d") y -= b("AY") * a;
  if (dgp_covariates(id)) y += b("C1Y") * e.c1 + b("C2Y") * e.c2;
  return y;
}

inline double mediator_draw(const std::string& id, const Exogenous& e, double a, const Coefs& b) {
  return e.um < expit(mediator_logit(id, e, a, b)) ? 1.0 : 0.0;
}

}  // namespace detail

inline RoleAssignment dgp_roles(const std::string& id) {
  RoleAssignment r;
  if (detail::dgp_covariates(id)) r.c = {"C1", "C2"};
  return r;
}

// n i.i.d. observed rows; latent variables are discarded.
inline Dataset sample_dgp(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("sample_dgp: n must be >= 1");
  const detail::Coefs b = detail::resolve(spec, seed);
  const bool cov = detail::dgp_covariates(spec.id);
  std::vector<double> C1, C2, Z(n), A(n), M(n), Y(n);
  if (cov) {
    C1.resize(n);
    C2.resize(n);
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto e = detail::draw_exogenous(spec.id, rng, b);
    double a = e.ua < expit(detail::treatment_logit(spec.id, e, b)) ? 1.0 : 0.0;
    double m = detail::mediator_draw(spec.id, e, a, b);
    Z[i] = e.z;
    A[i] = a;
    M[i] = m;
    Y[i] = detail::outcome_value(spec.id, e, a, m, b);
    if (cov) {
      C1[i] = e.c1;
      C2[i] = e.c2;
    }
  }
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  if (cov) {
    names = {"C1", "C2"};
    cols = {std::move(C1), std::move(C2)};
  }
  for (const char* s : {"Z", "A", "M", "Y"}) names.push_back(s);
  cols.push_back(std::move(Z));
  cols.push_back(std::move(A));
  cols.push_back(std::move(M));
  cols.push_back(std::move(Y));
  return Dataset(names, std::move(cols)).with_roles(dgp_roles(spec.id));
}

// E[Y|do(a1)] - E[Y|do(a0)] by simulating both interventions on common
// exogenous draws.
inline double true_ace(const DgpSpec& spec, double a1, double a0, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 100000) throw ValidationError("true_ace: n_mc must be >= 100000");
  const detail::Coefs b = detail::resolve(spec, seed);
  Rng rng(derive_seed(seed, 0xACEULL));
  double sum = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    auto e = detail::draw_exogenous(spec.id, rng, b);
    double y1 = detail::outcome_value(spec.id, e, a1, detail::mediator_draw(spec.id, e, a1, b), b);
    double y0 = detail::outcome_value(spec.id, e, a0, detail::mediator_draw(spec.id, e, a0, b), b);
    sum += y1 - y0;
  }
  return sum / static_cast<double>(n_mc);
}

// Closed form by integrating the mediator probability over the latent and
// anchor distributions (composite Simpson rule on uniform latents). Not
// available for the covariate design.
inline double true_ace_closed_form(const DgpSpec& spec, double a1, double a0) {
  if (detail::dgp_covariates(spec.id)) throw ValidationError("true_ace_closed_form: not available for " + spec.id);
  if (spec.beta.empty()) throw ValidationError("true_ace_closed_form: coefficients must be fixed");
  const detail::Coefs b = detail::resolve(spec, 0);
  const std::string base = detail::dgp_base(spec.id);
  const double pz = expit(0.5), pu = expit(0.5);
  const int K = 2000;  // even
  auto simpson = [&](auto&& f) {
    double h = 2.0 / K, s = f(-1.0) + f(1.0);
    for (int k = 1; k < K; ++k) s += (k % 2 ? 4.0 : 2.0) * f(-1.0 + k * h);
    return s * h / 3.0 / 2.0;  // mean over Uniform(-1, 1)
  };
  auto p_m = [&](double a) {
    double total = 0.0;
    for (int ub = 0; ub < 2; ++ub) {  // U2 or U4
      double pb = ub ? pu : 1.0 - pu;
      if (base == "b") {
        // Z is irrelevant for M here; the mediator depends on (U3, U4)
        detail::Exogenous e;
        e.u4 = ub;
        total += pb * simpson([&](double u) {
          e.u3 = u;
          double l = detail::mediator_logit(spec.id, e, a, b);
          if (detail::dgp_nonlinear(spec.id)) {
            // the interaction involves Z, whose law depends on (U3, U4)
            double z1 = expit(0.5 + b("U3Z") * u - b("U4Z") * ub);
            detail::Exogenous e1 = e, e0 = e;
            e1.z = 1.0;
            e0.z = 0.0;
            return z1 * expit(detail::mediator_logit(spec.id, e1, a, b)) +
                   (1.0 - z1) * expit(detail::mediator_logit(spec.id, e0, a, b));
          }
          return expit(l);
        });
        continue;
      }
      for (int z = 0; z < 2; ++z) {
        detail::Exogenous e;
        e.z = z;
        e.u2 = ub;
        double w = pb * (z ? pz : 1.0 - pz);
        total += w * simpson([&](double u) {
          e.u1 = u;
          return expit(detail::mediator_logit(spec.id, e, a, b));
        });
      }
    }
    return total;
  };
  double ace = -b("MY") * (p_m(a1) - p_m(a0));
  if (base == "d") ace -= b("AY") * (a1 - a0);
  return ace;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  std::string task = "i";
  int trials = 100;
  std::vector<std::size_t> sizes{200, 1000, 5000, 20000};
  double alpha = 0.05;
  std::vector<std::string> methods;  // task i: primal|dual|nonparam; task ii: primal-ipw|dual-ipw|iv
  std::uint64_t seed = 0;
  unsigned threads = 0;              // 0: FDT_THREADS or hardware
  bool nonlinear = false;            // task i: use the nonlinear designs
  std::vector<std::string> dgps;     // task ii designs
  std::size_t n_mc = 200000;
  double a = 1.0;                    // reference level for dual weights

  void validate() const {
    if (task != "i" && task != "ii") throw ValidationError("experiment: task must be i or ii");
    if (trials < 1) throw ValidationError("experiment: trials must be >= 1");
    if (sizes.empty()) throw ValidationError("experiment: no sample sizes");
    for (auto n : sizes)
      if (n < 50) throw ValidationError("experiment: sample sizes must be >= 50");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("experiment: alpha must lie in (0, 1)");
    if (n_mc < 100000) throw ValidationError("experiment: n_mc must be >= 100000");
  }

  std::vector<std::string> resolved_methods() const {
    if (!methods.empty()) return methods;
    if (task == "i") return {"primal", "dual"};
    return {"primal-ipw", "dual-ipw", "iv"};
  }

  std::vector<std::string> resolved_dgps() const {
    if (!dgps.empty()) return dgps;
    return {"iv-fd", "a"};
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["trials"] = trials;
    j["sizes"] = sizes;
    j["alpha"] = alpha;
    j["methods"] = resolved_methods();
    j["seed"] = seed;
    if (task == "i") j["nonlinear"] = nonlinear;
    if (task == "ii") j["dgps"] = resolved_dgps();
    j["n_mc"] = n_mc;
    j["a"] = a;
    return j;
  }
};

struct TrialRecord {
  int trial = 0;
  std::size_t n = 0;
  std::string dgp;
  std::string method;
  bool failed = false;
  std::string error;
  double p_value = 0.0;     // task i
  bool accept = false;      // task i
  double estimate = 0.0;
  double truth = 0.0;

  nlohmann::ordered_json to_json(const std::string& task) const {
    nlohmann::ordered_json j;
    j["trial"] = trial;
    j["n"] = n;
    j["dgp"] = dgp;
    j["method"] = method;
    j["failed"] = failed;
    if (failed) {
      j["error"] = error;
      return j;
    }
    if (task == "i") {
      j["p_value"] = p_value;
      j["accept"] = accept;
    }
    j["estimate"] = estimate;
    j["truth"] = truth;
    return j;
  }
};

struct MetricRow {
  std::string method;
  std::string dgp;  // task ii only
  std::size_t n = 0;
  int trials = 0;
  int failed = 0;
  // task i
  double tpr = 0.0, fpr = 0.0;
  int valid = 0, invalid = 0;
  std::optional<double> bias_accept_valid, bias_accept_invalid;
  // task ii
  double mean_estimate = 0.0, mean_truth = 0.0, bias = 0.0, variance = 0.0, mean_abs_bias = 0.0;
};

struct MetricsReport {
  ExperimentConfig config;
  std::vector<MetricRow> rows;
  std::vector<TrialRecord> records;
  bool ok = true;
  std::string status = "ok";

  const MetricRow& row(const std::string& method, std::size_t n, const std::string& dgp = "") const {
    for (const auto& r : rows)
      if (r.method == method && r.n == n && r.dgp == dgp) return r;
    throw ValidationError("metrics: no row for " + method);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = "1.0";
    j["config"] = config.to_json();
    j["status"] = status;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
    auto opt = [](const std::optional<double>& v) {
      return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    for (const auto& r : rows) {
      nlohmann::ordered_json m;
      m["method"] = r.method;
      if (config.task == "ii") m["dgp"] = r.dgp;
      m["n"] = r.n;
      m["trials"] = r.trials;
      m["failed"] = r.failed;
      if (config.task == "i") {
        m["tpr"] = r.tpr;
        m["fpr"] = r.fpr;
        m["valid_trials"] = r.valid;
        m["invalid_trials"] = r.invalid;
        m["mean_abs_bias_accept_valid"] = opt(r.bias_accept_valid);
        m["mean_abs_bias_accept_invalid"] = opt(r.bias_accept_invalid);
      } else {
        m["mean_estimate"] = r.mean_estimate;
        m["mean_truth"] = r.mean_truth;
        m["bias"] = r.bias;
        m["variance"] = r.variance;
        m["mean_abs_bias"] = r.mean_abs_bias;
      }
      metrics.push_back(m);
    }
    j["metrics"] = metrics;
    nlohmann::ordered_json recs = nlohmann::ordered_json::array();
    for (const auto& r : records) recs.push_back(r.to_json(config.task));
    j["records"] = recs;
    return j;
  }

  // Tidy (method, dgp, n, metric, value) rows for external plotting.
  std::string metrics_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "method,dgp,n,metric,value\n";
    for (const auto& r : rows) {
      auto put = [&](const char* name, double v) {
        out << r.method << "," << r.dgp << "," << r.n << "," << name << "," << v << "\n";
      };
      if (config.task == "i") {
        put("tpr", r.tpr);
        put("fpr", r.fpr);
        if (r.bias_accept_valid) put("mean_abs_bias_accept_valid", *r.bias_accept_valid);
        if (r.bias_accept_invalid) put("mean_abs_bias_accept_invalid", *r.bias_accept_invalid);
      } else {
        put("bias", r.bias);
        put("variance", r.variance);
        put("mean_abs_bias", r.mean_abs_bias);
      }
      put("failed", r.failed);
    }
    return out.str();
  }
};

namespace detail {

inline bool valid_design(const std::string& id) {
  std::string base = dgp_base(id);
  return base == "a" || base == "b";
}

// Effect estimator paired with each test: the test's weights feed the IPW
// estimator of the same family.
inline Method estimator_for_test(const std::string& test) {
  if (test == "primal") return Method::primal_ipw;
  if (test == "dual" || test == "nonparam") return Method::dual_ipw;
  throw ValidationError("unknown test method '" + test + "'");
}

inline void finish(MetricsReport& rep) {
  int failed = 0;
  for (const auto& r : rep.records) failed += r.failed;
  if (!rep.records.empty() && failed > 0.05 * static_cast<double>(rep.records.size())) {
    rep.ok = false;
    rep.status = "failed: more than 5% of trials failed";
  }
}

}  // namespace detail

// Task (i): each trial picks one of the four designs uniformly, draws its
// coefficients, and runs every configured test at each sample size. The
// design and coefficients of trial t are shared across sample sizes.
inline MetricsReport run_task_i(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto methods = cfg.resolved_methods();
  for (const auto& m : methods) parse_verma_method(m);
  const std::size_t T = static_cast<std::size_t>(cfg.trials), S = cfg.sizes.size();
  std::vector<std::vector<TrialRecord>> out(T * S);
  std::vector<DgpSpec> specs(T);
  std::vector<double> truths(T);
  for (std::size_t t = 0; t < T; ++t) {
    Rng design_rng(derive_seed(cfg.seed, t));
    static const char* bases[] = {"a", "b", "c", "d"};
    std::string id = bases[design_rng.index(4)];
    if (cfg.nonlinear) id += "-nonlinear";
    specs[t] = draw_dgp(id, design_rng);
  }
  parallel_for(
      T, [&](std::size_t t) { truths[t] = true_ace(specs[t], 1.0, 0.0, cfg.n_mc, derive_seed(cfg.seed, t, 0xACE)); },
      cfg.threads);

  parallel_for(
      T * S,
      [&](std::size_t job) {
        const std::size_t t = job / S, s = job % S;
        const std::size_t n = cfg.sizes[s];
        const DgpSpec& spec = specs[t];
        const std::string& id = spec.id;
        const double truth = truths[t];
        Dataset data = sample_dgp(spec, n, derive_seed(cfg.seed, t, n));
        const RoleAssignment roles = dgp_roles(id);
        for (std::size_t k = 0; k < methods.size(); ++k) {
          TrialRecord rec;
          rec.trial = static_cast<int>(t);
          rec.n = n;
          rec.dgp = id;
          rec.method = methods[k];
          rec.truth = truth;
          try {
            auto rep = verma_test(data, roles, parse_verma_method(methods[k]), cfg.a, cfg.alpha,
                                  derive_seed(cfg.seed, t, n ^ (k << 40)));
            rec.p_value = rep.p_value;
            rec.accept = rep.accept();
            EstimateConfig ec;
            ec.method = detail::estimator_for_test(methods[k]);
            rec.estimate = effect_estimate(data, roles, ec);
          } catch (const Error& e) {
            rec.failed = true;
            rec.error = e.what();
          }
          out[job].push_back(rec);
        }
      },
      cfg.threads);

  MetricsReport rep;
  rep.config = cfg;
  for (auto& v : out)
    for (auto& r : v) rep.records.push_back(std::move(r));
  for (const auto& m : methods)
    for (std::size_t n : cfg.sizes) {
      MetricRow row;
      row.method = m;
      row.n = n;
      int acc_valid = 0, acc_invalid = 0, nb_valid = 0, nb_invalid = 0;
      double b_valid = 0.0, b_invalid = 0.0;
      for (const auto& r : rep.records) {
        if (r.method != m || r.n != n) continue;
        ++row.trials;
        if (r.failed) {
          ++row.failed;
          continue;
        }
        bool valid = detail::valid_design(r.dgp);
        (valid ? row.valid : row.invalid) += 1;
        if (!r.accept) continue;
        double ab = std::abs(r.estimate - r.truth);
        if (valid) {
          ++acc_valid;
          b_valid += ab;
          ++nb_valid;
        } else {
          ++acc_invalid;
          b_invalid += ab;
          ++nb_invalid;
        }
      }
      row.tpr = row.valid ? static_cast<double>(acc_valid) / row.valid : 0.0;
      row.fpr = row.invalid ? static_cast<double>(acc_invalid) / row.invalid : 0.0;
      if (nb_valid) row.bias_accept_valid = b_valid / nb_valid;
      if (nb_invalid) row.bias_accept_invalid = b_invalid / nb_invalid;
      rep.rows.push_back(row);
    }
  detail::finish(rep);
  return rep;
}

// Task (ii): effect estimates on each configured design with coefficients
// redrawn per trial; bias and variance are of the error estimate - truth.
inline MetricsReport run_task_ii(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto methods = cfg.resolved_methods();
  const auto dgps = cfg.resolved_dgps();
  for (const auto& m : methods) parse_method(m);
  for (const auto& d : dgps) detail::dgp_base(d);
  const std::size_t T = static_cast<std::size_t>(cfg.trials), S = cfg.sizes.size(), G = dgps.size();
  std::vector<std::vector<TrialRecord>> out(G * T * S);
  std::vector<DgpSpec> specs(G * T);
  std::vector<double> truths(G * T);
  for (std::size_t gt = 0; gt < G * T; ++gt) {
    Rng design_rng(derive_seed(cfg.seed, gt / T, gt % T));
    specs[gt] = draw_dgp(dgps[gt / T], design_rng);
  }
  parallel_for(
      G * T,
      [&](std::size_t gt) {
        truths[gt] = true_ace(specs[gt], 1.0, 0.0, cfg.n_mc, derive_seed(cfg.seed, gt / T, (gt % T) ^ 0xACE0000ULL));
      },
      cfg.threads);

  parallel_for(
      G * T * S,
      [&](std::size_t job) {
        const std::size_t g = job / (T * S), t = (job / S) % T, s = job % S;
        const std::size_t n = cfg.sizes[s];
        const DgpSpec& spec = specs[g * T + t];
        const double truth = truths[g * T + t];
        Dataset data = sample_dgp(spec, n, derive_seed(derive_seed(cfg.seed, g, t), n));
        const RoleAssignment roles = dgp_roles(dgps[g]);
        for (const auto& m : methods) {
          TrialRecord rec;
          rec.trial = static_cast<int>(t);
          rec.n = n;
          rec.dgp = dgps[g];
          rec.method = m;
          rec.truth = truth;
          try {
            EstimateConfig ec;
            ec.method = parse_method(m);
            rec.estimate = effect_estimate(data, roles, ec);
          } catch (const Error& e) {
            rec.failed = true;
            rec.error = e.what();
          }
          out[job].push_back(rec);
        }
      },
      cfg.threads);

  MetricsReport rep;
  rep.config = cfg;
  for (auto& v : out)
    for (auto& r : v) rep.records.push_back(std::move(r));
  for (const auto& d : dgps)
    for (const auto& m : methods)
      for (std::size_t n : cfg.sizes) {
        MetricRow row;
        row.method = m;
        row.dgp = d;
        row.n = n;
        std::vector<double> err;
        double est = 0.0, tru = 0.0, abs_sum = 0.0;
        for (const auto& r : rep.records) {
          if (r.method != m || r.n != n || r.dgp != d) continue;
          ++row.trials;
          if (r.failed) {
            ++row.failed;
            continue;
          }
          err.push_back(r.estimate - r.truth);
          est += r.estimate;
          tru += r.truth;
          abs_sum += std::abs(r.estimate - r.truth);
        }
        if (!err.empty()) {
          const double k = static_cast<double>(err.size());
          row.mean_estimate = est / k;
          row.mean_truth = tru / k;
          double mean = 0.0;
          for (double e : err) mean += e;
          mean /= k;
          row.bias = mean;
          double ss = 0.0;
          for (double e : err) ss += (e - mean) * (e - mean);
          row.variance = err.size() > 1 ? ss / (k - 1.0) : 0.0;
          row.mean_abs_bias = abs_sum / k;
        }
        rep.rows.push_back(row);
      }
  detail::finish(rep);
  return rep;
}

inline MetricsReport run_experiment(const ExperimentConfig& cfg) {
  return cfg.task == "i" ? run_task_i(cfg) : run_task_ii(cfg);
}

}  // namespace fdt

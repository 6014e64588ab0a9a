#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "fdt/simulation.hpp"
#include "fdt/verma_tests.hpp"
#include "tables.hpp"

using namespace fdt;

namespace {

const RoleAssignment kRoles = RoleAssignment::parse("Z=Z,A=A,M=M,Y=Y");

DgpSpec fixed_spec(const std::string& id, double b = 1.5) {
  DgpSpec s{id, {}};
  for (const auto& k : dgp_coefficients(id)) s.beta[k] = b;
  return s;
}

// Rows of an exact table repeated in proportion to their probabilities
// (largest-remainder rounding to n rows in total).
Dataset expand_table(const DiscreteJoint& joint, std::size_t n) {
  std::vector<std::size_t> count(joint.cells());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t c = 0; c < joint.cells(); ++c) {
    double x = joint.probs()[c] * n;
    count[c] = static_cast<std::size_t>(std::floor(x));
    used += count[c];
    rem.push_back({x - count[c], c});
  }
  std::sort(rem.rbegin(), rem.rend());
  for (std::size_t k = 0; used < n; ++k, ++used) ++count[rem[k].second];
  std::vector<std::vector<double>> cols(joint.names().size());
  for (std::size_t c = 0; c < joint.cells(); ++c) {
    auto idx = joint.decode(c);
    for (std::size_t r = 0; r < count[c]; ++r)
      for (std::size_t k = 0; k < idx.size(); ++k) cols[k].push_back(joint.support(k)[idx[k]]);
  }
  return Dataset(joint.names(), cols);
}

}  // namespace

TEST(TestReportTest, DecisionFollowsPValue) {
  TestReport r;
  r.alpha = 0.05;
  r.p_value = 0.05;
  EXPECT_EQ(r.decision(), "reject-null");
  r.p_value = 0.0500001;
  EXPECT_EQ(r.decision(), "accept-null");
  auto j = r.to_json();
  EXPECT_EQ(j["decision"], "accept-null");
  EXPECT_TRUE(j.contains("seed"));
}

TEST(ChiSquare, SurvivalFunction) {
  EXPECT_NEAR(chi_square_sf(3.841458820694124, 1), 0.05, 1e-12);
  EXPECT_NEAR(chi_square_sf(5.991464547107979, 2), 0.05, 1e-12);
  EXPECT_EQ(chi_square_sf(0.0, 1), 1.0);
}

TEST(WeightedGof, ScaleInvariance) {
  Dataset d = sample_dgp(fixed_spec("a"), 3000, 1);
  auto m_fits = fit_mediator_models(d, kRoles, NuisanceSpec::defaults(kRoles));
  WeightVector w = dual_weights(d, kRoles, m_fits, 1.0);
  TestReport base = weighted_gof_test(d, w, kRoles);
  for (double c : {4.0, 0.125, 3.0, 1e-3}) {
    WeightVector s = w;
    for (double& v : s.values) v *= c;
    TestReport t = weighted_gof_test(d, s, kRoles);
    EXPECT_NEAR(t.statistic, base.statistic, 1e-9 * (1.0 + base.statistic)) << c;
    EXPECT_NEAR(t.p_value, base.p_value, 1e-10) << c;
    EXPECT_EQ(t.decision(), base.decision());
  }
  WeightVector pow2 = w;
  for (double& v : pow2.values) v *= 8.0;
  EXPECT_EQ(weighted_gof_test(d, pow2, kRoles).statistic, base.statistic);
}

TEST(WeightedGof, SizeUnderOrdinaryIndependence) {
  // Y depends on M only; weights all one
  int reject = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(404, t));
    const std::size_t n = 400;
    std::vector<double> z(n), a(n), m(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = rng.bernoulli(0.5);
      a[i] = rng.bernoulli(expit(-0.5 + z[i]));
      m[i] = rng.bernoulli(expit(-0.5 + z[i] + a[i]));
      y[i] = 1.0 - 1.5 * m[i] + rng.normal();
    }
    Dataset d({"Z", "A", "M", "Y"}, {z, a, m, y});
    WeightVector w;
    w.values.assign(n, 1.0);
    reject += !weighted_gof_test(d, w, kRoles).accept();
  }
  double rate = static_cast<double>(reject) / trials;
  EXPECT_GE(rate, 0.02);
  EXPECT_LE(rate, 0.09);
}

TEST(WeightedGof, LikelihoodRatioVariantAgreesInDirection) {
  Dataset null_data = sample_dgp(fixed_spec("a"), 5000, 2);
  Dataset alt_data = sample_dgp(fixed_spec("d"), 5000, 2);
  GofOptions lr;
  lr.likelihood_ratio = true;
  for (auto* d : {&null_data, &alt_data}) {
    auto w = primal_weights(*d, kRoles, fit_treatment_model(*d, kRoles, NuisanceSpec::defaults(kRoles)),
                            fit_outcome_model(*d, kRoles, NuisanceSpec::defaults(kRoles)));
    auto wald = weighted_gof_test(*d, w, kRoles);
    auto ratio = weighted_gof_test(*d, w, kRoles, 0.05, lr);
    EXPECT_GE(ratio.statistic, 0.0);
    EXPECT_EQ(wald.accept(), ratio.accept()) << wald.p_value << " vs " << ratio.p_value;
  }
}

TEST(VermaTests, PowerAgainstDirectEffect) {
  int reject = 0;
  for (int t = 0; t < 100; ++t) {
    Rng g(derive_seed(8, t));
    Dataset d = sample_dgp(draw_dgp("d", g), 20000, derive_seed(9, t));
    reject += !primal_verma_test(d, kRoles).accept();
  }
  EXPECT_GE(reject, 95);
}

TEST(VermaTests, DegenerateInputs) {
  Dataset one({"Z", "A", "M", "Y"}, {{0}, {1}, {0}, {0.3}});
  EXPECT_THROW(primal_verma_test(one, kRoles), Error);
  Dataset base = sample_dgp(fixed_spec("a"), 500, 3);
  std::vector<std::vector<double>> cols;
  for (const auto& n : base.names()) cols.push_back(n == "Z" ? std::vector<double>(base.n(), 1.0) : base.column(n));
  Dataset flat(base.names(), cols);
  for (auto method : {VermaMethod::primal, VermaMethod::dual, VermaMethod::nonparam}) {
    try {
      verma_test(flat, kRoles, method, 1.0, 0.05, 1);
      ADD_FAILURE() << "constant anchor accepted";
    } catch (const StatisticalError& e) {
      EXPECT_NE(std::string(e.what()).find("anchor not relevant (A2 violated)"), std::string::npos);
    }
  }
  EXPECT_THROW(primal_verma_test(base, kRoles, 1.5), ValidationError);
  EXPECT_THROW(primal_verma_test(base, RoleAssignment::parse("Z=Z,A=A,M=Q,Y=Y")), ValidationError);
  EXPECT_THROW(parse_verma_method("fcit"), ValidationError);
}

TEST(VermaTests, ReportsCarryNuisanceSummaries) {
  Dataset d = sample_dgp(fixed_spec("a"), 2000, 4);
  auto p = primal_verma_test(d, kRoles);
  EXPECT_EQ(p.test, "primal");
  EXPECT_EQ(p.nuisance.size(), 3u);
  EXPECT_EQ(p.weights["provenance"], "primal");
  auto q = dual_verma_test(d, kRoles, 0.0);
  EXPECT_EQ(q.weights["a"], 0.0);
  EXPECT_GE(q.p_value, 0.0);
  EXPECT_LE(q.p_value, 1.0);
}

TEST(ResamplePseudo, DeterministicAndDominated) {
  Dataset d = sample_dgp(fixed_spec("a"), 200, 5);
  WeightVector w;
  w.values.assign(d.n(), 1e-9);
  w.values[17] = 1e6;
  auto p1 = resample_pseudo(d, w, 100, 42);
  auto p2 = resample_pseudo(d, w, 100, 42);
  EXPECT_EQ(p1.data.column("Y"), p2.data.column("Y"));
  EXPECT_EQ(p1.source_n, 200u);
  for (double y : p1.data.column("Y")) EXPECT_EQ(y, d.column("Y")[17]);
  EXPECT_THROW(resample_pseudo(d, w, 0, 1), ValidationError);
}

TEST(ResamplePseudo, UniformWeightsGiveUniformDraws) {
  std::vector<double> id(50);
  for (int i = 0; i < 50; ++i) id[i] = i;
  Dataset d({"I"}, {id});
  WeightVector w;
  w.values.assign(50, 2.0);
  auto p = resample_pseudo(d, w, 50000, 7);
  std::vector<int> counts(50, 0);
  for (double v : p.data.column("I")) ++counts[static_cast<int>(v)];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  EXPECT_GT(chi_square_sf(chi2, 49), 1e-3);
}

TEST(ResamplePseudo, DualWeightsMimicInterventionalTable) {
  std::mt19937_64 rng(77);
  auto table = tables::random_front_door(rng, true);
  Dataset d = expand_table(table.joint, 100000);
  auto m_fits = fit_mediator_models(d, kRoles, NuisanceSpec::saturated(kRoles));
  for (double a : {0.0, 1.0}) {
    WeightVector w = dual_weights(d, kRoles, m_fits, a);
    auto pseudo = resample_pseudo(d, w, d.n(), 11);
    auto post = id_functional_evaluate(table.joint, kRoles, a).post;
    std::map<std::vector<double>, double> emp;
    for (std::size_t i = 0; i < pseudo.data.n(); ++i)
      emp[{pseudo.data.column("Z")[i], pseudo.data.column("M")[i], pseudo.data.column("Y")[i]}] += 1.0 / d.n();
    double tv = 0.0;
    for (std::size_t c = 0; c < post.cells(); ++c) {
      auto idx = post.decode(c);
      std::map<std::string, double> v;
      for (std::size_t k = 0; k < idx.size(); ++k) v[post.names()[k]] = post.support(k)[idx[k]];
      tv += std::abs(post.probs()[c] - emp[{v["Z"], v["M"], v["Y"]}]);
    }
    EXPECT_LT(0.5 * tv, 0.02) << "a=" << a;
  }
}

TEST(PermutationTest, IdenticalColumnsGiveMinimalPValue) {
  Rng rng(1);
  std::vector<double> x(100);
  for (auto& v : x) v = rng.normal();
  Dataset d({"X", "Y"}, {x, x});
  auto r = ci_test_permutation(d, "X", "Y", {}, 199, 3);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 200.0);
  EXPECT_THROW(ci_test_permutation(d, "X", "Y", {}, 98, 3), ValidationError);
  EXPECT_THROW(ci_test_permutation(d, "X", "X", {}, 99, 3), ValidationError);
  Dataset c({"X", "Y"}, {x, std::vector<double>(100, 2.0)});
  EXPECT_THROW(ci_test_permutation(c, "X", "Y", {}, 99, 3), StatisticalError);
}

TEST(PermutationTest, SizeUnderGaussianConditionalIndependence) {
  int reject = 0;
  double lo = 1.0, hi = 0.0;
  for (int t = 0; t < 500; ++t) {
    Rng rng(derive_seed(505, t));
    const std::size_t n = 200;
    std::vector<double> s(n), x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.normal();
      x[i] = 0.8 * s[i] + rng.normal();
      y[i] = -0.6 * s[i] + rng.normal();
    }
    Dataset d({"S", "X", "Y"}, {s, x, y});
    auto r = ci_test_permutation(d, "X", "Y", {"S"}, 199, derive_seed(506, t));
    reject += !r.accept();
    lo = std::min(lo, r.p_value);
    hi = std::max(hi, r.p_value);
  }
  EXPECT_GE(reject, 10);
  EXPECT_LE(reject, 45);
  EXPECT_GE(lo, 1.0 / 200.0);
  EXPECT_LE(hi, 1.0);
}

TEST(NonparamTest, DeterministicAndSeedSensitive) {
  Dataset d = sample_dgp(fixed_spec("a-nonlinear"), 2000, 6);
  auto a = nonparam_verma_test(d, kRoles, 1.0, 0.05, 10);
  auto b = nonparam_verma_test(d, kRoles, 1.0, 0.05, 10);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  NonparamOptions hist;
  hist.mediator_model = MediatorModel::histogram;
  auto h = nonparam_verma_test(d, kRoles, 1.0, 0.05, 10, hist);
  EXPECT_EQ(h.weights["provenance"], "dual");
  EXPECT_GE(h.p_value, 1.0 / 200.0);
}

TEST(NonparamTest, HistogramWeightsMatchSaturatedLogistic) {
  // with binary Z, A and a single mediator both estimators are cell frequencies
  Dataset d = sample_dgp(fixed_spec("a"), 4000, 13);
  auto m_fits = fit_mediator_models(d, kRoles, NuisanceSpec::saturated(kRoles));
  WeightVector lw = dual_weights(d, kRoles, m_fits, 1.0);
  WeightVector hw = detail::histogram_dual_weights(d, kRoles, 1.0, 4);
  for (std::size_t i = 0; i < d.n(); ++i) EXPECT_NEAR(hw.values[i], lw.values[i], 0.01 * lw.values[i]);
}

TEST(Battery, RowsFollowGraphStructure) {
  Dataset a = sample_dgp(fixed_spec("a"), 20000, 14);
  auto rows = assumption_battery(a, kRoles, 0.05, 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].row, "front-door");
  EXPECT_EQ(rows[1].row, "IV");
  EXPECT_EQ(rows[2].row, "back-door");
  EXPECT_TRUE(rows[0].report.accept());
  EXPECT_FALSE(rows[1].report.accept());
  EXPECT_FALSE(rows[2].report.accept());

  Dataset iv = sample_dgp(fixed_spec("iv-fd"), 20000, 15);
  auto iv_rows = assumption_battery(iv, kRoles, 0.05, 2);
  EXPECT_TRUE(iv_rows[0].report.accept());
  EXPECT_TRUE(iv_rows[1].report.accept());

  auto j = battery_json(rows);
  ASSERT_EQ(j.size(), 3u);
  for (const auto& r : j) {
    EXPECT_TRUE(r.contains("p_value"));
    EXPECT_TRUE(r.contains("decision"));
  }
}

TEST(Battery, HandlesCovariates) {
  DgpSpec spec{"a-covariates", {}};
  Dataset d = sample_dgp(spec, 5000, 16);
  auto roles = *d.roles();
  ASSERT_EQ(roles.c.size(), 2u);
  auto rows = assumption_battery(d, roles, 0.05, 3, VermaMethod::primal);
  EXPECT_EQ(rows[0].report.test, "primal");
  for (const auto& r : rows) {
    EXPECT_GE(r.report.p_value, 0.0);
    EXPECT_LE(r.report.p_value, 1.0);
  }
}

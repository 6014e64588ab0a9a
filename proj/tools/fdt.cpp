#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdt/fdt.hpp"

namespace {

using nlohmann::ordered_json;
using namespace fdt;

constexpr const char* kVersion = "1.0";
const std::string kDefaultRoles = "Z=Z,A=A,M=M,Y=Y";

struct Output {
  std::string path;

  void write(const std::string& text) const {
    if (path.empty() || path == "-") {
      std::cout << text << "\n";
      return;
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << text << "\n";
  }
};

ordered_json envelope(const char* command, ordered_json config) {
  ordered_json j;
  j["version"] = kVersion;
  j["command"] = command;
  j["config"] = std::move(config);
  return j;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed) throw ValidationError("seed required");
  return *seed;
}

Dataset load(const std::string& path, const std::string& roles) {
  return Dataset::read_csv_file(path).with_roles(RoleAssignment::parse(roles));
}

std::string roles_string(const RoleAssignment& r) { return r.to_string(); }

// ---------------------------------------------------------------------------

struct GraphCheckArgs {
  std::string graph;
  std::string roles = kDefaultRoles;
  Output out;
};

int run_graph_check(const GraphCheckArgs& a) {
  std::ifstream in(a.graph);
  if (!in) throw ValidationError("cannot read " + a.graph);
  std::stringstream buf;
  buf << in.rdbuf();
  MixedGraph g = parse_graph(buf.str());
  RoleAssignment roles = RoleAssignment::parse(a.roles);

  ordered_json cfg;
  cfg["graph"] = a.graph;
  cfg["roles"] = roles_string(roles);
  ordered_json j = envelope("graph check", cfg);
  j["graph"] = g.to_json();
  ordered_json dis = ordered_json::array();
  for (const auto& d : districts(g)) dis.push_back(std::vector<std::string>(d.begin(), d.end()));
  j["districts"] = dis;
  const bool tian = tian_identifiable(g, roles.a);
  const bool verma = verma_constraint_implied(g, roles);
  j["tian_identifiable"] = tian;
  j["verma_implied"] = verma;
  j["anchor_admissible"] = anchor_admissible(g, roles);
  j["iv_conditions"] = iv_conditions(g, roles);
  if (tian && verma) {
    j["nested_propensity"] = nested_propensity(g, roles).to_string();
    j["constraint"] = "present";
  } else {
    j["nested_propensity"] = nullptr;
    j["constraint"] = "absent";
  }
  a.out.write(j.dump(2));
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string dgp;
  std::size_t n = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string beta;  // JSON object of coefficients; empty draws them
  std::string report;
};

int run_simulate(const SimulateArgs& a) {
  const std::uint64_t seed = require_seed(a.seed);
  if (a.out.empty()) throw ValidationError("--out is required");
  DgpSpec spec{a.dgp, {}};
  if (!a.beta.empty()) {
    auto b = nlohmann::json::parse(a.beta, nullptr, false);
    if (b.is_discarded() || !b.is_object()) throw ValidationError("--beta must be a JSON object");
    for (auto it = b.begin(); it != b.end(); ++it) {
      if (!it.value().is_number()) throw ValidationError("--beta: coefficient " + it.key() + " is not a number");
      spec.beta[it.key()] = it.value().get<double>();
    }
  }
  Dataset d = sample_dgp(spec, a.n, seed);
  d.write_csv_file(a.out);
  ordered_json cfg;
  cfg["dgp"] = a.dgp;
  cfg["n"] = a.n;
  cfg["seed"] = seed;
  cfg["out"] = a.out;
  ordered_json j = envelope("simulate", cfg);
  j["columns"] = d.names();
  j["roles"] = roles_string(*d.roles());
  if (!spec.beta.empty()) j["beta"] = spec.beta;
  Output{a.report}.write(j.dump(2));
  return 0;
}

// ---------------------------------------------------------------------------

struct TestArgs {
  std::string data;
  std::string method = "dual";
  double alpha = 0.05;
  double a = 1.0;
  std::optional<std::uint64_t> seed;
  std::string roles = kDefaultRoles;
  bool lr = false;
  std::string mediator_model = "logistic";
  int n_perm = 199;
  std::size_t pseudo_size = 0;
  Output out;
};

int run_test(const TestArgs& a) {
  const VermaMethod method = parse_verma_method(a.method);
  std::uint64_t seed = 0;
  if (method == VermaMethod::nonparam) seed = require_seed(a.seed);
  else if (a.seed) seed = *a.seed;
  Dataset d = load(a.data, a.roles);
  GofOptions gof;
  gof.likelihood_ratio = a.lr;
  NonparamOptions np;
  if (a.mediator_model == "histogram") np.mediator_model = MediatorModel::histogram;
  else if (a.mediator_model == "logistic") np.mediator_model = MediatorModel::logistic_interactions;
  else throw ValidationError("--mediator-model must be logistic or histogram");
  np.n_perm = a.n_perm;
  np.m = a.pseudo_size;
  TestReport rep = verma_test(d, d.require_roles(), method, a.a, a.alpha, seed, gof, np);

  ordered_json cfg;
  cfg["data"] = a.data;
  cfg["method"] = a.method;
  cfg["alpha"] = a.alpha;
  cfg["a"] = a.a;
  cfg["seed"] = a.seed ? ordered_json(*a.seed) : ordered_json(nullptr);
  cfg["roles"] = roles_string(d.require_roles());
  if (method != VermaMethod::nonparam) cfg["likelihood_ratio"] = a.lr;
  if (method == VermaMethod::nonparam) {
    cfg["mediator_model"] = a.mediator_model;
    cfg["n_perm"] = a.n_perm;
    cfg["pseudo_size"] = a.pseudo_size ? a.pseudo_size : d.n() / 2;
  }
  ordered_json j = envelope("test", cfg);
  j["report"] = rep.to_json();
  j["decision"] = rep.decision();
  a.out.write(j.dump(2));
  return 0;
}

// ---------------------------------------------------------------------------

struct BatteryArgs {
  std::string data;
  std::string method = "nonparam";
  double alpha = 0.05;
  double a = 1.0;
  std::optional<std::uint64_t> seed;
  std::string roles = kDefaultRoles;
  int n_perm = 199;
  Output out;
};

int run_battery(const BatteryArgs& a) {
  const std::uint64_t seed = require_seed(a.seed);
  Dataset d = load(a.data, a.roles);
  auto rows = assumption_battery(d, d.require_roles(), a.alpha, seed, parse_verma_method(a.method), a.a, a.n_perm);
  ordered_json cfg;
  cfg["data"] = a.data;
  cfg["method"] = a.method;
  cfg["alpha"] = a.alpha;
  cfg["a"] = a.a;
  cfg["seed"] = seed;
  cfg["roles"] = roles_string(d.require_roles());
  cfg["n_perm"] = a.n_perm;
  ordered_json j = envelope("battery", cfg);
  j["rows"] = battery_json(rows);
  a.out.write(j.dump(2));
  return 0;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string data;
  std::string method = "primal-ipw";
  double a1 = 1.0, a0 = 0.0;
  int bootstrap = 0;
  std::optional<std::uint64_t> seed;
  std::string roles = kDefaultRoles;
  bool clip = false;
  double weak_iv = 1e-3;
  Output out;
};

int run_estimate(const EstimateArgs& a) {
  EstimateConfig cfg;
  cfg.method = parse_method(a.method);
  cfg.a1 = a.a1;
  cfg.a0 = a.a0;
  cfg.B = a.bootstrap;
  if (a.bootstrap < 0) throw ValidationError("--bootstrap must be >= 0");
  if (a.bootstrap > 0) cfg.seed = require_seed(a.seed);
  else if (a.seed) cfg.seed = *a.seed;
  cfg.clip = a.clip;
  cfg.weak_iv_threshold = a.weak_iv;
  Dataset d = load(a.data, a.roles);
  EstimateReport rep = estimate_effect(d, d.require_roles(), cfg);

  ordered_json c;
  c["data"] = a.data;
  c["method"] = to_string(cfg.method);
  c["a1"] = a.a1;
  c["a0"] = a.a0;
  c["bootstrap"] = a.bootstrap;
  c["seed"] = a.seed ? ordered_json(*a.seed) : ordered_json(nullptr);
  c["roles"] = roles_string(d.require_roles());
  c["clip"] = a.clip;
  if (cfg.method == Method::iv_wald) c["weak_iv_threshold"] = a.weak_iv;
  ordered_json j = envelope("estimate", c);
  j["report"] = rep.to_json();
  a.out.write(j.dump(2));
  return 0;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string task = "i";
  int trials = 100;
  std::vector<std::size_t> sizes{200, 1000, 5000, 20000};
  double alpha = 0.05;
  std::vector<std::string> methods;
  std::vector<std::string> dgps;
  std::optional<std::uint64_t> seed;
  bool nonlinear = false;
  std::size_t n_mc = 200000;
  unsigned threads = 0;
  std::string out;
  std::string metrics_csv;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  ExperimentConfig cfg;
  cfg.task = a.task;
  cfg.trials = a.trials;
  cfg.sizes = a.sizes;
  cfg.alpha = a.alpha;
  cfg.methods = a.methods;
  cfg.dgps = a.dgps;
  cfg.seed = require_seed(a.seed);
  cfg.nonlinear = a.nonlinear;
  cfg.n_mc = a.n_mc;
  cfg.threads = a.threads;
  MetricsReport rep = run_experiment(cfg);
  ordered_json j = rep.to_json();
  j["command"] = "experiment";
  Output{a.out}.write(j.dump(2));
  if (!a.metrics_csv.empty()) {
    std::ofstream csv(a.metrics_csv);
    if (!csv) throw ValidationError("cannot write " + a.metrics_csv);
    csv << rep.metrics_csv();
  }
  if (!rep.ok) throw StatisticalError("experiment: " + rep.status);
  return 0;
}

int report_error(const char* kind, const std::string& message, int code) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Front-door testing and estimation with anchor variables", "fdt"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // graph check
  GraphCheckArgs gc;
  auto* graph = app.add_subcommand("graph", "Graph-level checks");
  graph->require_subcommand(1);
  auto* check = graph->add_subcommand("check", "Identification and constraint checks for an ADMG");
  check->add_option("--graph", gc.graph, "Graph JSON file (vertices, fixed, di_edges, bi_edges)")->required();
  check->add_option("--roles", gc.roles, "Role assignment Z=..,A=..,M=M1+M2,Y=..,C=C1+C2")->capture_default_str();
  check->add_option("--out", gc.out.path, "Output file (default stdout)");

  // simulate
  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Sample a synthetic dataset");
  simulate->add_option("--dgp", sa.dgp, "Design: a|b|c|d|a-nonlinear|b-nonlinear|c-nonlinear|d-nonlinear|iv-fd|a-covariates")
      ->required();
  simulate->add_option("--n", sa.n, "Number of rows")->required();
  simulate->add_option("--seed", sa.seed, "Random seed (required)");
  simulate->add_option("--out", sa.out, "CSV output file")->required();
  simulate->add_option("--beta", sa.beta, "Coefficients as a JSON object; drawn from Uniform(1,2) when absent");
  simulate->add_option("--report", sa.report, "Write the JSON summary here (default stdout)");

  // test
  TestArgs ta;
  auto* test = app.add_subcommand("test", "Test the front-door constraint on data");
  test->add_option("--data", ta.data, "CSV input")->required();
  test->add_option("--method", ta.method, "primal|dual|nonparam")->capture_default_str();
  test->add_option("--alpha", ta.alpha, "Significance level")->capture_default_str();
  test->add_option("--a", ta.a, "Reference treatment value for dual weights")->capture_default_str();
  test->add_option("--seed", ta.seed, "Random seed (required for nonparam)");
  test->add_option("--roles", ta.roles, "Role assignment")->capture_default_str();
  test->add_flag("--lr", ta.lr, "Weighted pseudo-likelihood-ratio statistic instead of Wald");
  test->add_option("--mediator-model", ta.mediator_model, "nonparam: logistic|histogram")->capture_default_str();
  test->add_option("--n-perm", ta.n_perm, "nonparam: permutations")->capture_default_str();
  test->add_option("--pseudo-size", ta.pseudo_size, "nonparam: pseudo-dataset size (0 = n/2)")->capture_default_str();
  test->add_option("--out", ta.out.path, "Output file (default stdout)");

  // battery
  BatteryArgs ba;
  auto* battery = app.add_subcommand("battery", "Front-door, instrument and back-door tests");
  battery->add_option("--data", ba.data, "CSV input")->required();
  battery->add_option("--method", ba.method, "Front-door test: primal|dual|nonparam")->capture_default_str();
  battery->add_option("--alpha", ba.alpha, "Significance level")->capture_default_str();
  battery->add_option("--a", ba.a, "Reference treatment value for dual weights")->capture_default_str();
  battery->add_option("--seed", ba.seed, "Random seed (required)");
  battery->add_option("--roles", ba.roles, "Role assignment")->capture_default_str();
  battery->add_option("--n-perm", ba.n_perm, "Permutations per CI test")->capture_default_str();
  battery->add_option("--out", ba.out.path, "Output file (default stdout)");

  // estimate
  EstimateArgs ea;
  auto* estimate = app.add_subcommand("estimate", "Estimate E[Y|do(a1)] - E[Y|do(a0)]");
  estimate->add_option("--data", ea.data, "CSV input")->required();
  estimate->add_option("--method", ea.method, "primal-ipw|dual-ipw|iv|plugin")->capture_default_str();
  estimate->add_option("--a1", ea.a1, "Treatment level")->capture_default_str();
  estimate->add_option("--a0", ea.a0, "Reference level")->capture_default_str();
  estimate->add_option("--bootstrap", ea.bootstrap, "Bootstrap replicates (0 = none)")->capture_default_str();
  estimate->add_option("--seed", ea.seed, "Random seed (required with --bootstrap)");
  estimate->add_option("--roles", ea.roles, "Role assignment")->capture_default_str();
  estimate->add_flag("--clip", ea.clip, "Clip weights at the 0.5 and 99.5 percentiles");
  estimate->add_option("--weak-iv", ea.weak_iv, "iv: minimum |E[A|Z=1]-E[A|Z=0]|")->capture_default_str();
  estimate->add_option("--out", ea.out.path, "Output file (default stdout)");

  // experiment
  ExperimentArgs xa;
  auto* experiment = app.add_subcommand("experiment", "Run a simulation study");
  experiment->add_option("--task", xa.task, "i (tests) or ii (estimators)")->capture_default_str();
  experiment->add_option("--trials", xa.trials, "Trials per sample size")->capture_default_str();
  experiment->add_option("--sizes", xa.sizes, "Comma-separated sample sizes")->delimiter(',')->capture_default_str();
  experiment->add_option("--alpha", xa.alpha, "Significance level")->capture_default_str();
  experiment->add_option("--methods", xa.methods, "Comma-separated methods (task i: primal,dual,nonparam; task ii: primal-ipw,dual-ipw,iv)")
      ->delimiter(',');
  experiment->add_option("--dgps", xa.dgps, "task ii: comma-separated designs (default iv-fd,a)")->delimiter(',');
  experiment->add_option("--seed", xa.seed, "Master seed (required)");
  experiment->add_flag("--nonlinear", xa.nonlinear, "task i: use the nonlinear designs");
  experiment->add_option("--n-mc", xa.n_mc, "Monte Carlo size for true effects")->capture_default_str();
  experiment->add_option("--threads", xa.threads, "Worker threads (0 = FDT_THREADS or hardware)")->capture_default_str();
  experiment->add_option("--out", xa.out, "JSON report file (default stdout)");
  experiment->add_option("--metrics-csv", xa.metrics_csv, "Tidy metrics CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 1);
  }

  try {
    if (*graph) return run_graph_check(gc);
    if (*simulate) return run_simulate(sa);
    if (*test) return run_test(ta);
    if (*battery) return run_battery(ba);
    if (*estimate) return run_estimate(ea);
    if (*experiment) return run_experiment_cmd(xa);
  } catch (const ValidationError& e) {
    return report_error(e.kind(), e.what(), 1);
  } catch (const Error& e) {
    return report_error(e.kind(), e.what(), 2);
  } catch (const nlohmann::json::exception& e) {
    return report_error("validation", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), 2);
  }
  return 1;
}

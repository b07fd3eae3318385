#include <algorithm>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebhb/ebhb.hpp"

namespace {

using json = nlohmann::ordered_json;
using Cell = std::variant<std::string, double, std::uint64_t>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct Common {
  std::uint64_t seed = 1;
  std::string out = "-";
  std::string format = "csv";
};

void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t j = 0; j < t.columns.size(); ++j) os << (j ? "," : "") << ebhb::io::csv_field(t.columns[j]);
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) os << ',';
      std::visit(
          [&os](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::string>) os << ebhb::io::csv_field(v);
            else if constexpr (std::is_same_v<V, double>) os << ebhb::io::format_double(v);
            else os << v;
          },
          row[j]);
    }
    os << '\n';
  }
}

json to_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::object();
    for (std::size_t j = 0; j < row.size(); ++j)
      std::visit([&](const auto& v) { r[t.columns[j]] = v; }, row[j]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ebhb::DomainError("cannot write " + path);
  os << text;
  if (!os) throw ebhb::DomainError("write failed for " + path);
}

void emit_table(const Common& c, const std::string& path, const Table& t) {
  std::ostringstream os;
  if (c.format == "json") os << to_json(t).dump() << '\n';
  else write_csv(os, t);
  emit(path, os.str());
}

void emit_json(const std::string& path, const json& j) { emit(path, j.dump() + "\n"); }

Table draws_table(const ebhb::PosteriorDraws& d) {
  Table t{{"draw", "param", "value"}, {}};
  t.rows.reserve(d.rows() * d.cols());
  for (std::size_t r = 0; r < d.rows(); ++r)
    for (std::size_t j = 0; j < d.cols(); ++j)
      t.rows.push_back({static_cast<std::uint64_t>(r + 1), d.names()[j], d.at(r, j)});
  return t;
}

ebhb::io::CsvTable read_input(const std::string& path) {
  if (path == "-") return ebhb::io::read_csv(std::cin);
  return ebhb::io::read_csv_file(path);
}

struct GibbsFlags {
  std::size_t iter = 20000;
  std::size_t burn = 5000;
  std::size_t thin = 1;
  std::string tau_sampler = "aux";

  void add(CLI::App* app) {
    app->add_option("--iter", iter, "Gibbs iterations")->capture_default_str();
    app->add_option("--burn", burn, "burn-in iterations")->capture_default_str();
    app->add_option("--thin", thin, "keep every k-th draw")->capture_default_str();
    app->add_option("--tau-sampler", tau_sampler, "global-scale update")
        ->check(CLI::IsMember({"aux", "slice"}))
        ->capture_default_str();
  }

  ebhb::HorseshoeConfig config(std::uint64_t seed) const {
    ebhb::HorseshoeConfig cfg;
    cfg.n_iter = iter;
    cfg.burn_in = burn;
    cfg.thin = thin;
    cfg.seed = seed;
    cfg.tau_sampler = tau_sampler == "slice" ? ebhb::TauSampler::Slice : ebhb::TauSampler::AuxiliaryVariable;
    cfg.validate();
    return cfg;
  }
};

struct ScenarioFlags {
  ebhb::SparseScenario s;

  void add(CLI::App* app) {
    app->add_option("--n", s.n, "number of means")->capture_default_str();
    app->add_option("--sparsity", s.sparsity, "fraction of nonzero means")->capture_default_str();
    app->add_option("--signal", s.signal, "value of the nonzero means")->capture_default_str();
    app->add_option("--sigma", s.sigma, "noise sd")->capture_default_str();
  }
};

// simulate ------------------------------------------------------------------

struct SimulateArgs {
  std::string kind = "means";
  ScenarioFlags scenario;
  std::uint64_t replicate = 0;
  std::size_t cells = 1000;
  double w = 0.7, shape1 = 2.0, rate1 = 4.0, shape2 = 5.0, rate2 = 1.0, e_lo = 0.2, e_hi = 20.0;
  double theta = 0.0, mu = 0.0, gamma = 0.5, var_exp = 1.0, var_obs = 0.05, var_cal = 0.05;
  std::size_t n_obs = 5, n_cal = 3;
};

void run_simulate(const Common& c, const SimulateArgs& a) {
  if (a.kind == "means") {
    ebhb::SparseScenario s = a.scenario.s;
    s.seed = c.seed;
    const auto sample = ebhb::simulate_sparse_means(s, a.replicate);
    Table t{{"theta", "x"}, {}};
    for (std::size_t i = 0; i < sample.theta.size(); ++i) t.rows.push_back({sample.theta[i], sample.data.x[i]});
    emit_table(c, c.out, t);
  } else if (a.kind == "drug-event") {
    const ebhb::MgpsParams p{a.w, {a.shape1, a.rate1}, {a.shape2, a.rate2}};
    ebhb::RngStream rng(c.seed, a.replicate);
    const auto table = ebhb::simulate_drug_event_table(p, a.cells, a.e_lo, a.e_hi, rng);
    Table t{{"drug", "event", "n", "e"}, {}};
    for (const auto& cell : table.cells) t.rows.push_back({cell.drug, cell.event, cell.n, cell.e});
    emit_table(c, c.out, t);
  } else {
    ebhb::RngStream rng(c.seed, a.replicate);
    const auto set =
        ebhb::simulate_study_set(a.theta, a.mu, a.gamma, a.var_exp, a.n_obs, a.var_obs, a.n_cal, a.var_cal, rng);
    Table t{{"role", "estimate", "variance"}, {}};
    if (set.experiment) t.rows.push_back({std::string("exp"), set.experiment->estimate, set.experiment->variance});
    for (const auto& s : set.observational) t.rows.push_back({std::string("obs"), s.estimate, s.variance});
    for (const auto& s : set.calibration) t.rows.push_back({std::string("calib"), s.estimate, s.variance});
    emit_table(c, c.out, t);
  }
}

// fit-tweedie / fit-npmle ---------------------------------------------------

struct GridFlags {
  std::optional<double> lo, hi;
  std::size_t count = 201;

  void add(CLI::App* app, const std::string& what) {
    app->add_option("--grid-lo", lo, what + " grid lower end (default: smallest x)");
    app->add_option("--grid-hi", hi, what + " grid upper end (default: largest x)");
    app->add_option("--grid-count", count, what + " grid size")->capture_default_str();
  }

  std::vector<double> make(const ebhb::NormalMeansData& d) const {
    const auto [mn, mx] = std::minmax_element(d.x.begin(), d.x.end());
    return ebhb::linspace(lo.value_or(*mn), hi.value_or(*mx), count);
  }
};

Table rule_table(const ebhb::ShrinkageRule& rule) {
  Table t{{"grid", "value", "method_tag"}, {}};
  for (std::size_t i = 0; i < rule.grid.size(); ++i)
    t.rows.push_back({rule.grid[i], rule.values[i], std::string(ebhb::to_string(rule.method_tag))});
  return t;
}

struct TweedieArgs {
  std::string input = "-";
  double sigma = 1.0;
  std::size_t bins = 60, df = 5;
  GridFlags grid;
};

void run_fit_tweedie(const Common& c, const TweedieArgs& a) {
  const auto data = ebhb::io::read_normal_means(read_input(a.input), a.sigma);
  const auto fit = ebhb::fit_marginal(data, a.bins, a.df);
  emit_table(c, c.out, rule_table(ebhb::tweedie_rule(fit, a.sigma, a.grid.make(data))));
}

struct NpmleArgs {
  std::string input = "-";
  double sigma = 1.0;
  std::size_t atoms = 600;
  std::optional<double> atom_lo, atom_hi;
  double tol = 1e-8;
  std::size_t max_iter = 5000;
  bool plain_em = false;
  std::optional<double> prune;
  std::string rule_out;
  GridFlags grid;
};

void run_fit_npmle(const Common& c, const NpmleArgs& a) {
  const auto data = ebhb::io::read_normal_means(read_input(a.input), a.sigma);
  ebhb::GridSpec spec = ebhb::GridSpec::covering(data, a.atoms);
  if (a.atom_lo) spec.lo = *a.atom_lo;
  if (a.atom_hi) spec.hi = *a.atom_hi;
  ebhb::NpmleOptions opts;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  opts.accelerate = !a.plain_em;
  if (a.plain_em) {
    opts.screen_weight = 0.0;
    opts.revive_every = 0;
  }
  const auto fit = ebhb::fit_npmle(data, spec, opts);
  ebhb::DiscretePrior prior = fit.prior;
  if (a.prune) {
    prior = ebhb::support_prune(prior, *a.prune);
  } else {
    ebhb::DiscretePrior kept;
    for (std::size_t k = 0; k < prior.atoms.size(); ++k)
      if (prior.weights[k] > 0.0) {
        kept.atoms.push_back(prior.atoms[k]);
        kept.weights.push_back(prior.weights[k]);
      }
    prior = kept;
  }
  Table t{{"atom", "weight"}, {}};
  for (std::size_t k = 0; k < prior.atoms.size(); ++k) t.rows.push_back({prior.atoms[k], prior.weights[k]});
  emit_table(c, c.out, t);
  if (!a.rule_out.empty())
    emit_table(c, a.rule_out, rule_table(ebhb::bayes_rule_discrete(prior, a.sigma, a.grid.make(data))));
}

// fit-horseshoe -------------------------------------------------------------

struct HorseshoeArgs {
  std::string input = "-";
  double sigma = 1.0;
  std::optional<double> tau;
  std::string tau_mode = "sample";
  GibbsFlags gibbs;
};

void run_fit_horseshoe(const Common& c, const HorseshoeArgs& a) {
  const auto data = ebhb::io::read_normal_means(read_input(a.input), a.sigma);
  auto cfg = a.gibbs.config(c.seed);
  if (a.tau) cfg.tau_fixed = *a.tau;
  else if (a.tau_mode == "plugin") cfg.tau_fixed = ebhb::fit_tau_mml(data);
  cfg.validate();
  emit_table(c, c.out, draws_table(ebhb::gibbs_horseshoe(data, cfg)));
}

// mgps ----------------------------------------------------------------------

struct MgpsArgs {
  std::string input = "-";
  std::string covariates;
  std::string draws_out;
  std::string params_out;
  double r = 1.0;
  double tol = 1e-6;
  std::size_t max_evals = 20000;
  GibbsFlags gibbs;
};

void run_mgps(const Common& c, const MgpsArgs& a) {
  const auto table = ebhb::io::read_drug_event_table(read_input(a.input));
  if (table.size() < 50) std::cerr << "warning: fewer than 50 cells; the type-II fit may be unstable\n";
  const auto fit = ebhb::fit_type2_ml(table, ebhb::MgpsParams::default_init(), a.tol, a.max_evals);
  if (!fit.converged) std::cerr << "warning: type-II optimizer did not converge\n";
  if (fit.degenerate) std::cerr << "warning: degenerate type-II fit\n";
  Table t{{"drug", "event", "n", "e", "ebgm", "eb05", "weight1"}, {}};
  for (const auto& row : ebhb::score_table(table, fit.params))
    t.rows.push_back({row.cell.drug, row.cell.event, row.cell.n, row.cell.e, row.ebgm, row.eb05, row.weight1});
  emit_table(c, c.out, t);

  if (!a.params_out.empty()) {
    const auto& p = fit.params;
    json j{{"w", p.w},
           {"shape1", p.comp1.shape},
           {"rate1", p.comp1.rate},
           {"shape2", p.comp2.shape},
           {"rate2", p.comp2.rate},
           {"loglik", fit.loglik},
           {"converged", fit.converged},
           {"degenerate", fit.degenerate}};
    emit_json(a.params_out, j);
  }
  if (!a.covariates.empty()) {
    if (a.draws_out.empty()) throw ebhb::DomainError("--covariates needs --draws-out");
    std::vector<std::string> names;
    const Eigen::MatrixXd x = ebhb::io::read_covariates(ebhb::io::read_csv_file(a.covariates), table, &names);
    const auto res = ebhb::pg_covariate_gibbs(table, x, a.r, a.gibbs.config(c.seed));
    if (res.rank_deficient) std::cerr << "warning: covariates are rank deficient after centering; jitter added\n";
    emit_table(c, a.draws_out, draws_table(res.draws));
  }
}

// calibrate -----------------------------------------------------------------

struct CalibrateArgs {
  std::string input = "-";
  std::string method = "full";
  std::string summary;
  ebhb::BiasHyperPrior hyper;
  double theta_prior_var = ebhb::kDefaultThetaPriorVar;
  double level = 0.95;
  bool exclude_calibration = false;
  GibbsFlags gibbs;
};

void run_calibrate(const Common& c, const CalibrateArgs& a) {
  const auto studies = ebhb::io::read_study_set(read_input(a.input));
  if (!(a.level > 0.0 && a.level < 1.0)) throw ebhb::DomainError("level must lie in (0, 1)");
  const auto cfg = a.gibbs.config(c.seed);
  json summary;
  ebhb::PosteriorDraws draws;
  if (a.method == "plugin") {
    const auto post = ebhb::eb_plugin_calibration(studies, a.theta_prior_var);
    draws = ebhb::PosteriorDraws({"theta"}, 0, 1, c.seed);
    ebhb::RngStream rng(c.seed, 0);
    const std::size_t count = cfg.retained();
    draws.reserve(count);
    for (std::size_t i = 0; i < count; ++i) draws.push_row(std::vector<double>{rng.normal(post.theta_mean, post.theta_sd)});
    const boost::math::normal z;
    const double q = boost::math::quantile(z, 0.5 + 0.5 * a.level);
    summary = {{"method", "plugin"},
               {"theta_mean", post.theta_mean},
               {"theta_sd", post.theta_sd},
               {"level", a.level},
               {"lower", post.theta_mean - q * post.theta_sd},
               {"upper", post.theta_mean + q * post.theta_sd},
               {"mu_hat", post.mu_hat},
               {"gamma2_hat", post.gamma2_hat},
               {"boundary", post.boundary}};
  } else {
    ebhb::CalibrationDraws res;
    if (a.method == "horseshoe") {
      ebhb::StudySet s = studies;
      if (a.exclude_calibration) s.calibration.clear();
      res = ebhb::gibbs_calibration_horseshoe(s, cfg, a.theta_prior_var);
    } else {
      res = ebhb::gibbs_calibration(studies, a.hyper, a.theta_prior_var, cfg, !a.exclude_calibration);
    }
    draws = std::move(res.draws);
    const auto theta = draws.column("theta");
    auto sorted = theta;
    std::sort(sorted.begin(), sorted.end());
    const double alpha = 0.5 * (1.0 - a.level);
    summary = {{"method", a.method},
               {"theta_mean", ebhb::sample_mean(theta)},
               {"theta_sd", std::sqrt(ebhb::sample_variance(theta))},
               {"level", a.level},
               {"lower", ebhb::quantile_sorted(sorted, alpha)},
               {"upper", ebhb::quantile_sorted(sorted, 1.0 - alpha)},
               {"experiment_only", res.experiment_only}};
  }
  emit_table(c, c.out, draws_table(draws));
  if (!a.summary.empty()) emit_json(a.summary, summary);
  else if (c.out != "-") std::cout << summary.dump() << '\n';
}

// pop-predictive ------------------------------------------------------------

struct PopArgs {
  std::string population = "normal";
  double pop_mean = 0.0, pop_sd = 1.0, pop_c = 1.0;
  std::string pop_sample;
  std::size_t n = 10, replicates = 200;
  double prior_mean = 0.0, prior_var = 1.0, sigma = 1.0;
  std::string density_out;
};

void run_pop_predictive(const Common& c, const PopArgs& a) {
  ebhb::PopulationSpec spec;
  if (a.population == "normal") {
    spec.population = ebhb::NormalPopulation{a.pop_mean, a.pop_sd};
  } else if (a.population == "two-point") {
    spec.population = ebhb::TwoPointPopulation{a.pop_c, a.pop_sd};
  } else {
    if (a.pop_sample.empty()) throw ebhb::DomainError("custom population needs --pop-sample");
    spec.population = ebhb::CustomPopulation{ebhb::io::read_normal_means(ebhb::io::read_csv_file(a.pop_sample), 1.0).x};
  }
  spec.n = a.n;
  spec.replicates = a.replicates;
  ebhb::RngStream rng(c.seed, 0);
  const auto summary = ebhb::population_predictive_mc({a.prior_mean, a.prior_var}, a.sigma, spec, rng);
  const auto dec = ebhb::variance_decomposition(summary);

  Table reps{{"replicate", "post_mean", "post_var"}, {}};
  for (std::size_t r = 0; r < summary.post_mean.size(); ++r)
    reps.rows.push_back({static_cast<std::uint64_t>(r + 1), summary.post_mean[r], summary.post_var[r]});
  Table dens{{"grid", "density"}, {}};
  for (std::size_t g = 0; g < summary.grid.size(); ++g) dens.rows.push_back({summary.grid[g], summary.density[g]});

  if (c.format == "json") {
    json j{{"replicates", to_json(reps)},
           {"population_predictive", to_json(dens)},
           {"within", dec.within},
           {"between", dec.between},
           {"total", dec.total}};
    emit_json(c.out, j);
    if (!a.density_out.empty()) emit_table(c, a.density_out, dens);
  } else {
    emit_table(c, c.out, reps);
    if (!a.density_out.empty()) emit_table(c, a.density_out, dens);
  }
}

// risk-bench / coverage-bench ----------------------------------------------

struct BenchArgs {
  ScenarioFlags scenario;
  std::vector<std::string> methods;
  std::size_t replicates = 50;
  double level = 0.95;
  std::size_t bins = 60, df = 5;
  GibbsFlags gibbs;

  std::vector<ebhb::Method> make(std::uint64_t seed) const {
    ebhb::BenchOptions opts;
    opts.gibbs = gibbs.config(seed);
    opts.fmodel_bins = bins;
    opts.fmodel_df = df;
    std::vector<ebhb::Method> out;
    for (const auto& m : methods) out.push_back(ebhb::make_method(m, opts));
    return out;
  }
};

void run_risk_bench(const Common& c, const BenchArgs& a) {
  ebhb::SparseScenario s = a.scenario.s;
  s.seed = c.seed;
  const auto table = ebhb::risk_bench(a.make(c.seed), s, a.replicates);
  Table t{{"method", "scenario", "risk", "se", "replicates", "failures"}, {}};
  for (const auto& r : table.rows)
    t.rows.push_back({r.method, r.scenario, r.risk, r.se, static_cast<std::uint64_t>(r.replicates),
                      static_cast<std::uint64_t>(r.failures)});
  emit_table(c, c.out, t);
}

void run_coverage_bench(const Common& c, const BenchArgs& a) {
  ebhb::SparseScenario s = a.scenario.s;
  s.seed = c.seed;
  const auto table = ebhb::coverage_bench(a.make(c.seed), s, a.level, a.replicates);
  Table t{{"method", "scenario", "level", "coverage", "coverage_se", "mean_width", "width_se", "replicates",
           "failures"},
          {}};
  for (const auto& r : table.rows)
    t.rows.push_back({r.method, r.scenario, r.level, r.coverage, r.coverage_se, r.mean_width, r.width_se,
                      static_cast<std::uint64_t>(r.replicates), static_cast<std::uint64_t>(r.failures)});
  emit_table(c, c.out, t);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical Bayes and hierarchical Bayes shrinkage toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "RNG seed")->capture_default_str();
  app.add_option("--out", common.out, "output path, - for stdout")->capture_default_str();
  app.add_option("--format", common.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "simulate a sparse means, drug-event or study data set");
  simulate->add_option("--kind", sim.kind, "data set kind")
      ->check(CLI::IsMember({"means", "drug-event", "studies"}))
      ->capture_default_str();
  sim.scenario.add(simulate);
  simulate->add_option("--replicate", sim.replicate, "replicate stream index")->capture_default_str();
  simulate->add_option("--cells", sim.cells, "drug-event cells")->capture_default_str();
  simulate->add_option("--w", sim.w, "weight of the first gamma component")->capture_default_str();
  simulate->add_option("--shape1", sim.shape1)->capture_default_str();
  simulate->add_option("--rate1", sim.rate1)->capture_default_str();
  simulate->add_option("--shape2", sim.shape2)->capture_default_str();
  simulate->add_option("--rate2", sim.rate2)->capture_default_str();
  simulate->add_option("--e-lo", sim.e_lo, "smallest expected count")->capture_default_str();
  simulate->add_option("--e-hi", sim.e_hi, "largest expected count")->capture_default_str();
  simulate->add_option("--theta", sim.theta, "true effect")->capture_default_str();
  simulate->add_option("--mu", sim.mu, "mean bias")->capture_default_str();
  simulate->add_option("--gamma", sim.gamma, "bias sd")->capture_default_str();
  simulate->add_option("--var-exp", sim.var_exp, "experimental variance, 0 for none")->capture_default_str();
  simulate->add_option("--n-obs", sim.n_obs, "observational studies")->capture_default_str();
  simulate->add_option("--var-obs", sim.var_obs)->capture_default_str();
  simulate->add_option("--n-cal", sim.n_cal, "calibration studies")->capture_default_str();
  simulate->add_option("--var-cal", sim.var_cal)->capture_default_str();

  TweedieArgs tw;
  auto* fit_tweedie = app.add_subcommand("fit-tweedie", "log-spline marginal and its Tweedie rule");
  fit_tweedie->add_option("--input", tw.input, "CSV with an x column")->capture_default_str();
  fit_tweedie->add_option("--sigma", tw.sigma, "noise sd")->capture_default_str();
  fit_tweedie->add_option("--bins", tw.bins, "histogram bins")->capture_default_str();
  fit_tweedie->add_option("--df", tw.df, "spline degrees of freedom")->capture_default_str();
  tw.grid.add(fit_tweedie, "rule");

  NpmleArgs np;
  auto* fit_npmle = app.add_subcommand("fit-npmle", "nonparametric ML prior on a grid");
  fit_npmle->add_option("--input", np.input, "CSV with an x column")->capture_default_str();
  fit_npmle->add_option("--sigma", np.sigma, "noise sd")->capture_default_str();
  fit_npmle->add_option("--atoms", np.atoms, "candidate atoms")->capture_default_str();
  fit_npmle->add_option("--atom-lo", np.atom_lo, "lowest atom (default: min x - sigma)");
  fit_npmle->add_option("--atom-hi", np.atom_hi, "highest atom (default: max x + sigma)");
  fit_npmle->add_option("--tol", np.tol, "log-likelihood gain tolerance")->capture_default_str();
  fit_npmle->add_option("--max-iter", np.max_iter)->capture_default_str();
  fit_npmle->add_flag("--plain-em", np.plain_em, "plain EM without acceleration");
  fit_npmle->add_option("--prune", np.prune, "drop atoms with weight below this and renormalize");
  fit_npmle->add_option("--rule-out", np.rule_out, "also write the posterior-mean rule here");
  np.grid.add(fit_npmle, "rule");

  HorseshoeArgs hs;
  auto* fit_horseshoe = app.add_subcommand("fit-horseshoe", "horseshoe Gibbs sampler for normal means");
  fit_horseshoe->add_option("--input", hs.input, "CSV with an x column")->capture_default_str();
  fit_horseshoe->add_option("--sigma", hs.sigma, "noise sd")->capture_default_str();
  fit_horseshoe->add_option("--tau", hs.tau, "hold the global scale at this value");
  fit_horseshoe->add_option("--tau-mode", hs.tau_mode, "sample the global scale or plug in its marginal ML value")
      ->check(CLI::IsMember({"sample", "plugin"}))
      ->capture_default_str();
  hs.gibbs.add(fit_horseshoe);

  MgpsArgs mg;
  auto* mgps = app.add_subcommand("mgps", "gamma-Poisson shrinker for drug-event tables");
  mgps->add_option("--input", mg.input, "CSV drug,event,n,e")->capture_default_str();
  mgps->add_option("--covariates", mg.covariates, "CSV keyed by drug,event for the Polya-Gamma regression");
  mgps->add_option("--draws-out", mg.draws_out, "regression draws output");
  mgps->add_option("--params-out", mg.params_out, "fitted hyperparameters as JSON");
  mgps->add_option("--r", mg.r, "negative-binomial count parameter")->capture_default_str();
  mgps->add_option("--tol", mg.tol, "simplex diameter tolerance")->capture_default_str();
  mgps->add_option("--max-evals", mg.max_evals)->capture_default_str();
  mg.gibbs.add(mgps);

  CalibrateArgs ca;
  auto* calibrate = app.add_subcommand("calibrate", "combine experimental, observational and calibration studies");
  calibrate->add_option("--input", ca.input, "CSV role,estimate,variance")->capture_default_str();
  calibrate->add_option("--method", ca.method, "posterior")
      ->check(CLI::IsMember({"full", "plugin", "horseshoe"}))
      ->capture_default_str();
  calibrate->add_option("--summary", ca.summary, "one-line JSON summary of theta");
  calibrate->add_option("--mu0", ca.hyper.mu0)->capture_default_str();
  calibrate->add_option("--k0", ca.hyper.k0)->capture_default_str();
  calibrate->add_option("--a0", ca.hyper.a0)->capture_default_str();
  calibrate->add_option("--b0", ca.hyper.b0)->capture_default_str();
  calibrate->add_option("--theta-prior-var", ca.theta_prior_var)->capture_default_str();
  calibrate->add_option("--level", ca.level, "interval level")->capture_default_str();
  calibrate->add_flag("--exclude-calibration", ca.exclude_calibration, "leave calibration studies out of the bias pool");
  ca.gibbs.add(calibrate);

  PopArgs pp;
  auto* pop = app.add_subcommand("pop-predictive", "population predictive in the normal-normal model");
  pop->add_option("--population", pp.population, "sampling population")
      ->check(CLI::IsMember({"normal", "two-point", "custom"}))
      ->capture_default_str();
  pop->add_option("--pop-mean", pp.pop_mean)->capture_default_str();
  pop->add_option("--pop-sd", pp.pop_sd)->capture_default_str();
  pop->add_option("--pop-c", pp.pop_c, "two-point offset")->capture_default_str();
  pop->add_option("--pop-sample", pp.pop_sample, "CSV with an x column for a custom population");
  pop->add_option("--n", pp.n, "observations per replicate")->capture_default_str();
  pop->add_option("--replicates", pp.replicates)->capture_default_str();
  pop->add_option("--prior-mean", pp.prior_mean)->capture_default_str();
  pop->add_option("--prior-var", pp.prior_var)->capture_default_str();
  pop->add_option("--sigma", pp.sigma, "noise sd")->capture_default_str();
  pop->add_option("--density-out", pp.density_out, "pooled density table");

  BenchArgs rb, cb;
  rb.methods = {"identity", "oracle", "fmodel", "npmle", "horseshoe"};
  cb.methods = {"identity", "horseshoe", "horseshoe-plugin"};
  auto* risk = app.add_subcommand("risk-bench", "squared-error risk over simulated sparse means");
  auto* coverage = app.add_subcommand("coverage-bench", "interval coverage over simulated sparse means");
  for (auto [sub, args] : {std::pair{risk, &rb}, std::pair{coverage, &cb}}) {
    args->scenario.add(sub);
    sub->add_option("--methods", args->methods, "comma-separated method names")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--replicates", args->replicates)->capture_default_str();
    sub->add_option("--bins", args->bins, "f-model histogram bins")->capture_default_str();
    sub->add_option("--df", args->df, "f-model spline df")->capture_default_str();
    args->gibbs.add(sub);
  }
  coverage->add_option("--level", cb.level, "interval level")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) run_simulate(common, sim);
    else if (*fit_tweedie) run_fit_tweedie(common, tw);
    else if (*fit_npmle) run_fit_npmle(common, np);
    else if (*fit_horseshoe) run_fit_horseshoe(common, hs);
    else if (*mgps) run_mgps(common, mg);
    else if (*calibrate) run_calibrate(common, ca);
    else if (*pop) run_pop_predictive(common, pp);
    else if (*risk) run_risk_bench(common, rb);
    else if (*coverage) run_coverage_bench(common, cb);
  } catch (const ebhb::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ebhb::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

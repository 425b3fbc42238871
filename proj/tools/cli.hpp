#pragma once

// Command-line front end. Every subcommand validates all of its parameters
// before computing anything, writes CSV or JSON, and maps failures to exit
// codes: 0 success, 2 invalid input, 1 runtime failure.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "treewave/treewave.hpp"

namespace treewave::cli {

using nlohmann::ordered_json;

enum class Format { csv, json };

/// Parameters shared by every subcommand, plus the per-command knobs.
struct RunConfig {
  int d = 3;
  double lambda = 0.0;
  std::optional<double> alpha;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = "-";
  std::string format;  // empty: the command's default

  int n = 10;
  int radius = 2;
  std::int64_t budget = kDefaultVertexBudget;
  std::string sampler = "recursive";
  std::int64_t reps = 100;
  int particles = 10000;
  int batches = 10;
  std::string method = "smc";
  int sweeps = 11000;
  int burnin = 1000;
  int thin = 10;
  int chains = 4;
  int coordinate = 0;  // 0: centre of the path
  std::string summary;
  double tol = 1e-6;
  int m = 64;
  double offset = 8.0;
  double alpha_min = -2.0;
  double alpha_max = 2.0;
  int steps = 21;
  bool ratios = false;
  std::vector<int> n_list{5, 10, 20};
  std::vector<int> m_list{5, 10, 20};
};

namespace detail {

using treewave::detail::require;

inline Format resolve_format(const RunConfig& cfg, Format fallback) {
  if (cfg.format.empty()) return fallback;
  return cfg.format == "json" ? Format::json : Format::csv;
}

inline ordered_json json_header(const RunConfig& cfg) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = "treewave";
  j["version"] = kVersion;
  j["d"] = cfg.d;
  j["lambda"] = cfg.lambda;
  j["seed"] = cfg.seed;
  return j;
}

inline io::Metadata metadata(const RunConfig& cfg) { return io::run_metadata(cfg.d, cfg.lambda, cfg.seed); }

// Writes to cfg.out, or to the fallback stream for "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw std::runtime_error("cannot open output file '" + path + "'");
      file_->imbue(std::locale::classic());
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

inline void emit_json(const ordered_json& j, const std::string& path, std::ostream& fallback) {
  Sink sink(path, fallback);
  *sink << j.dump(2) << '\n';
}

// ---- validation (runs before any computation) ----

inline void validate_common(const RunConfig& cfg) {
  SpectralPoint::make(cfg.d, cfg.lambda);
  require(cfg.threads >= 1, "--threads must be at least 1");
  require(cfg.format.empty() || cfg.format == "csv" || cfg.format == "json", "--format must be csv or json");
}

inline void require_alpha(const RunConfig& cfg) {
  require(cfg.alpha.has_value(), "--alpha is required for this command");
  require(std::isfinite(*cfg.alpha), "--alpha must be finite");
}

inline void validate(const std::string& command, const RunConfig& cfg) {
  validate_common(cfg);
  if (command == "profile") {
    require(cfg.n >= 2, "--n must be at least 2");
    require(cfg.n <= 100000, "--n is unreasonably large");
  } else if (command == "sample-ball" || command == "verify") {
    require(cfg.radius >= (command == "verify" ? 1 : 0), "--radius out of range");
    require(cfg.budget >= 1, "--budget must be positive");
    require(ball_size(cfg.d, cfg.radius) <= cfg.budget,
            "ball of radius " + std::to_string(cfg.radius) + " has " + std::to_string(ball_size(cfg.d, cfg.radius)) +
                " vertices, over the budget of " + std::to_string(cfg.budget));
    require(cfg.sampler == "dense" || cfg.sampler == "recursive" || (command == "verify" && cfg.sampler == "both"),
            "--sampler must be dense or recursive" + std::string(command == "verify" ? " or both" : ""));
    if (command == "verify") require(cfg.reps >= 1, "--reps must be at least 1");
  } else if (command == "sample-path") {
    require(cfg.n >= 1, "--n must be at least 1");
  } else if (command == "gibbs") {
    require_alpha(cfg);
    require(cfg.n >= 1, "--n must be at least 1");
    require(cfg.burnin >= 0, "--burnin must be non-negative");
    require(cfg.sweeps > cfg.burnin, "--sweeps must exceed --burnin");
    require(cfg.thin >= 1, "--thin must be at least 1");
    require(cfg.chains >= 1, "--chains must be at least 1");
    require(cfg.coordinate >= 0 && cfg.coordinate <= cfg.n, "--coordinate must lie in 1..n (0 for the centre)");
  } else if (command == "survival") {
    require_alpha(cfg);
    require(cfg.n >= 1, "--n must be at least 1");
    require(cfg.method == "direct" || cfg.method == "smc", "--method must be direct or smc");
    if (cfg.method == "direct") require(cfg.reps >= 1, "--reps must be at least 1");
    if (cfg.method == "smc") {
      require(cfg.particles >= 100, "--particles must be at least 100");
      require(cfg.batches >= 2, "--batches must be at least 2");
    }
  } else if (command == "rate") {
    require(cfg.m >= 16, "--m must be at least 16");
    require(cfg.offset > 0.0, "--offset must be positive");
    require(cfg.steps >= 1, "--steps must be at least 1");
    require(cfg.alpha_max >= cfg.alpha_min, "--alpha-max must not be below --alpha-min");
  } else if (command == "threshold") {
    require(cfg.tol > 0.0, "--tol must be positive");
    require(cfg.m >= 16, "--m must be at least 16");
    require(cfg.offset > 0.0, "--offset must be positive");
  } else if (command == "bounds") {
    if (cfg.ratios) {
      require_alpha(cfg);
      require(cfg.particles >= 100, "--particles must be at least 100");
      require(cfg.batches >= 2, "--batches must be at least 2");
      for (int v : cfg.n_list) require(v >= 1, "--n-list entries must be positive");
      for (int v : cfg.m_list) require(v >= 1, "--m-list entries must be positive");
    }
  }
}

// ---- commands ----

inline void cmd_profile(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, cfg.n);
  if (resolve_format(cfg, Format::csv) == Format::json) {
    auto j = json_header(cfg);
    j["phi"] = profile.table();
    j["big_phi"] = profile.big_phi();
    j["beta"] = profile.beta();
    emit_json(j, cfg.out, out);
    return;
  }
  Sink sink(cfg.out, out);
  auto meta = metadata(cfg);
  meta.emplace_back("big_phi", io::format_double(profile.big_phi()));
  io::CsvWriter csv(*sink, meta, {"n", "phi"});
  for (int k = 0; k <= cfg.n; ++k) {
    csv.cell(k).cell(profile.phi(k));
    csv.end_row();
  }
}

inline BallSample draw_ball(const RunConfig& cfg, const CovarianceProfile& profile, const std::string& sampler,
                            std::uint64_t replicate) {
  RandomStream rng(cfg.seed, replicate);
  if (sampler == "dense") return DenseBallSampler(profile, cfg.radius, cfg.budget).draw(rng);
  return RecursiveBallSampler(profile, cfg.radius, cfg.budget).draw(rng);
}

inline void cmd_sample_ball(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, std::max(2, 2 * cfg.radius));
  const auto sample = draw_ball(cfg, profile, cfg.sampler, 0);
  if (resolve_format(cfg, Format::csv) == Format::json) {
    auto j = json_header(cfg);
    j["sampler"] = cfg.sampler;
    j["radius"] = cfg.radius;
    auto& rows = j["vertices"] = ordered_json::array();
    for (std::size_t i = 0; i < sample.values.size(); ++i)
      rows.push_back({{"vertex", sample.ball->vertices[i].to_string()},
                      {"depth", sample.ball->vertices[i].depth()},
                      {"value", sample.values[i]}});
    emit_json(j, cfg.out, out);
    return;
  }
  Sink sink(cfg.out, out);
  auto meta = metadata(cfg);
  meta.emplace_back("sampler", cfg.sampler);
  meta.emplace_back("radius", std::to_string(cfg.radius));
  io::write_ball_csv(*sink, meta, sample);
}

inline void cmd_sample_path(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, 2);
  RandomStream rng(cfg.seed, 0);
  const auto sample = sample_path(profile, cfg.n, rng);
  const auto path = canonical_path(cfg.d, cfg.n);
  if (resolve_format(cfg, Format::csv) == Format::json) {
    auto j = json_header(cfg);
    j["sampler"] = "path-markov";
    j["n"] = cfg.n;
    j["values"] = sample.values;
    emit_json(j, cfg.out, out);
    return;
  }
  Sink sink(cfg.out, out);
  auto meta = metadata(cfg);
  meta.emplace_back("sampler", "path-markov");
  io::write_sample_csv(*sink, meta, path, sample.values);
}

struct VerifyRow {
  std::string sampler;
  double eigen_residual = 0.0;
  double sphere_residual = 0.0;
  double eigen_ratio = 0.0;   // worst residual / tolerance over replicates
  double sphere_ratio = 0.0;
};

inline void cmd_verify(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, std::max(2, 2 * cfg.radius));
  std::vector<std::string> samplers;
  if (cfg.sampler == "both") samplers = {"dense", "recursive"};
  else samplers = {cfg.sampler};
  std::vector<VerifyRow> rows;
  for (const auto& name : samplers) {
    std::unique_ptr<DenseBallSampler> dense;
    std::unique_ptr<RecursiveBallSampler> recursive;
    if (name == "dense") dense = std::make_unique<DenseBallSampler>(profile, cfg.radius, cfg.budget);
    else recursive = std::make_unique<RecursiveBallSampler>(profile, cfg.radius, cfg.budget);
    const auto reps = static_cast<std::size_t>(cfg.reps);
    std::vector<VerifyRow> per(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      RandomStream rng(cfg.seed, r);
      const auto s = dense ? dense->draw(rng) : recursive->draw(rng);
      per[r].eigen_residual = verify_eigen_residual(s);
      per[r].sphere_residual = verify_sphere_sums(s);
      per[r].eigen_ratio = per[r].eigen_residual / s.wave_tolerance();
      per[r].sphere_ratio = per[r].sphere_residual / s.sphere_tolerance();
    });
    VerifyRow row{name};
    for (const auto& p : per) {
      row.eigen_residual = std::max(row.eigen_residual, p.eigen_residual);
      row.sphere_residual = std::max(row.sphere_residual, p.sphere_residual);
      row.eigen_ratio = std::max(row.eigen_ratio, p.eigen_ratio);
      row.sphere_ratio = std::max(row.sphere_ratio, p.sphere_ratio);
    }
    rows.push_back(row);
  }
  if (resolve_format(cfg, Format::json) == Format::json) {
    auto j = json_header(cfg);
    j["radius"] = cfg.radius;
    j["reps"] = cfg.reps;
    j["relative_tolerance"] = kWaveTolerance;
    auto& arr = j["results"] = ordered_json::array();
    bool all = true;
    for (const auto& r : rows) {
      const bool pass = r.eigen_ratio <= 1.0 && r.sphere_ratio <= 1.0;
      all = all && pass;
      arr.push_back({{"sampler", r.sampler},
                     {"max_eigen_residual", r.eigen_residual},
                     {"max_sphere_residual", r.sphere_residual},
                     {"max_eigen_residual_over_tolerance", r.eigen_ratio},
                     {"max_sphere_residual_over_tolerance", r.sphere_ratio},
                     {"pass", pass}});
    }
    j["pass"] = all;
    emit_json(j, cfg.out, out);
    return;
  }
  Sink sink(cfg.out, out);
  io::CsvWriter csv(*sink, metadata(cfg),
                    {"sampler", "reps", "max_eigen_residual", "max_sphere_residual", "eigen_over_tol", "sphere_over_tol", "pass"});
  for (const auto& r : rows) {
    csv.cell(r.sampler).cell(cfg.reps).cell(r.eigen_residual).cell(r.sphere_residual).cell(r.eigen_ratio).cell(r.sphere_ratio);
    csv.cell(r.eigen_ratio <= 1.0 && r.sphere_ratio <= 1.0 ? "true" : "false");
    csv.end_row();
  }
}

inline void cmd_gibbs(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, 4);
  const double alpha = *cfg.alpha;
  const auto plan = build_gibbs_plan(profile, cfg.n);
  GibbsOptions options;
  options.sweeps = cfg.sweeps;
  options.burnin = cfg.burnin;
  options.thin = cfg.thin;
  const auto chains = gibbs_chains(plan, alpha, options, cfg.seed, cfg.chains, cfg.threads);

  {
    Sink sink(cfg.out, out);
    auto meta = metadata(cfg);
    meta.emplace_back("alpha", io::format_double(alpha));
    meta.emplace_back("n", std::to_string(cfg.n));
    io::CsvWriter csv(*sink, meta, {"chain", "sweep", "coordinate", "value"});
    for (std::size_t c = 0; c < chains.size(); ++c)
      for (const auto& state : chains[c])
        for (int k = 0; k < state.n(); ++k) {
          csv.cell(static_cast<int>(c)).cell(state.sweep).cell(k + 1).cell(state.values[k]);
          csv.end_row();
        }
  }
  if (cfg.summary.empty()) return;
  const auto pooled = pool_chains(chains);
  const int k = cfg.coordinate == 0 ? (cfg.n + 1) / 2 : cfg.coordinate;
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(alpha + 0.25 * i);
  const auto tail = repulsion_tail(pooled, k, grid);
  const auto centre = batch_means(coordinate_series(pooled, k));
  auto j = json_header(cfg);
  j["n"] = cfg.n;
  j["alpha"] = alpha;
  j["chains"] = cfg.chains;
  j["sweeps"] = cfg.sweeps;
  j["burnin"] = cfg.burnin;
  j["thin"] = cfg.thin;
  j["coordinate"] = k;
  j["mean"] = centre.mean;
  j["mean_stderr"] = centre.std_error;
  j["ess"] = tail.ess;
  auto& rows = j["tail"] = ordered_json::array();
  for (const auto& r : tail.rows) rows.push_back({{"x", r.x}, {"probability", r.probability}, {"stderr", r.std_error}});
  emit_json(j, cfg.summary, out);
}

inline void cmd_survival(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, 2);
  const double alpha = *cfg.alpha;
  std::vector<SurvivalEstimate> rows;
  if (cfg.method == "direct") {
    rows.push_back(survival_direct(profile, cfg.n, alpha, cfg.reps, cfg.seed, cfg.threads));
  } else {
    rows = survival_smc_curve(profile, cfg.n, alpha, SmcOptions{cfg.particles, cfg.batches, cfg.threads}, cfg.seed).points;
  }
  if (resolve_format(cfg, Format::csv) == Format::json) {
    auto j = json_header(cfg);
    j["alpha"] = alpha;
    j["method"] = cfg.method;
    auto& arr = j["estimates"] = ordered_json::array();
    for (const auto& e : rows)
      arr.push_back({{"n", e.n}, {"p_hat", e.p_hat}, {"stderr", e.std_error}, {"collapsed", e.collapsed}});
    emit_json(j, cfg.out, out);
    return;
  }
  Sink sink(cfg.out, out);
  auto meta = metadata(cfg);
  meta.emplace_back("alpha", io::format_double(alpha));
  io::CsvWriter csv(*sink, meta, {"n", "alpha", "p_hat", "stderr", "method"});
  for (const auto& e : rows) {
    csv.cell(e.n).cell(e.alpha).cell(e.p_hat).cell(e.std_error).cell(to_string(e.method));
    csv.end_row();
  }
}

inline TransferOptions transfer_options(const RunConfig& cfg) {
  TransferOptions t;
  t.m = cfg.m;
  t.u_max_offset = cfg.offset;
  return t;
}

inline void cmd_rate(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, 2);
  std::vector<double> alphas;
  for (int i = 0; i < cfg.steps; ++i)
    alphas.push_back(cfg.steps == 1 ? cfg.alpha_min
                                    : cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * i / (cfg.steps - 1));
  const auto options = transfer_options(cfg);
  const auto curve = rate_curve(profile, alphas, options, cfg.threads);
  if (resolve_format(cfg, Format::csv) == Format::json) {
    auto j = json_header(cfg);
    j["quadrature"] = {{"m", options.m}, {"u_max_offset", options.u_max_offset}, {"tolerance", options.tolerance}};
    j["alphas"] = curve.alphas;
    j["rates"] = curve.rates;
    j["strictly_decreasing"] = curve.strictly_decreasing();
    emit_json(j, cfg.out, out);
    return;
  }
  Sink sink(cfg.out, out);
  auto meta = metadata(cfg);
  meta.emplace_back("m", std::to_string(options.m));
  meta.emplace_back("u_max_offset", io::format_double(options.u_max_offset));
  io::CsvWriter csv(*sink, meta, {"alpha", "r", "stderr_or_tol"});
  for (std::size_t i = 0; i < curve.alphas.size(); ++i) {
    csv.cell(curve.alphas[i]).cell(curve.rates[i]).cell(options.tolerance);
    csv.end_row();
  }
}

inline void cmd_threshold(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, 2);
  const auto options = transfer_options(cfg);
  const auto result = critical_threshold(profile, cfg.tol, options);
  if (resolve_format(cfg, Format::json) == Format::json) {
    auto j = json_header(cfg);
    j["alpha_c"] = result.alpha_c;
    j["bracket"] = {result.lower_bound, result.upper_bound};
    j["tol"] = cfg.tol;
    j["rate_at_alpha_c"] = result.rate_at_alpha_c;
    j["target_rate"] = result.target_rate;
    j["quadrature"] = {{"m", options.m}, {"u_max_offset", options.u_max_offset}, {"tolerance", options.tolerance}};
    emit_json(j, cfg.out, out);
    return;
  }
  Sink sink(cfg.out, out);
  auto meta = metadata(cfg);
  meta.emplace_back("bracket_lower", io::format_double(result.lower_bound));
  meta.emplace_back("bracket_upper", io::format_double(result.upper_bound));
  io::CsvWriter csv(*sink, meta, {"alpha", "r", "stderr_or_tol"});
  csv.cell(result.alpha_c).cell(result.rate_at_alpha_c).cell(cfg.tol);
  csv.end_row();
}

inline void cmd_bounds(const RunConfig& cfg, std::ostream& out) {
  const auto profile = CovarianceProfile::build(cfg.d, cfg.lambda, 2);
  auto j = json_header(cfg);
  j["haggstrom_alpha"] = haggstrom_alpha(profile);
  j["expdec_alpha"] = expdec_alpha(profile);
  j["big_phi"] = profile.big_phi();
  j["beta"] = profile.beta();
  j["edge_correlation"] = profile.phi(1);
  if (cfg.ratios) {
    const auto report = survival_ratio_bounds(profile, *cfg.alpha, cfg.n_list, cfg.m_list,
                                              SmcOptions{cfg.particles, cfg.batches, cfg.threads}, cfg.seed);
    j["alpha"] = *cfg.alpha;
    auto& rows = j["ratios"] = ordered_json::array();
    for (const auto& r : report.rows) rows.push_back({{"n", r.n}, {"m", r.m}, {"ratio", r.ratio}, {"stderr", r.std_error}});
    j["ratio_bound_M"] = report.bound;
    j["ratios_finite"] = report.finite;
  }
  if (resolve_format(cfg, Format::json) == Format::csv) {
    Sink sink(cfg.out, out);
    io::CsvWriter csv(*sink, metadata(cfg), {"quantity", "value"});
    csv.cell("haggstrom_alpha").cell(j["haggstrom_alpha"].get<double>()).end_row();
    csv.cell("expdec_alpha").cell(j["expdec_alpha"].get<double>()).end_row();
    csv.cell("big_phi").cell(profile.big_phi()).end_row();
    csv.cell("beta").cell(profile.beta()).end_row();
    return;
  }
  emit_json(j, cfg.out, out);
}

inline void add_common(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--d", cfg.d, "tree degree (>= 3)");
  cmd->add_option("--lambda", cfg.lambda, "spectral parameter in [-2 sqrt(d-1), 2 sqrt(d-1)]");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--threads", cfg.threads, "worker threads (results do not depend on this)");
  cmd->add_option("--out", cfg.out, "output file ('-' for stdout)");
  cmd->add_option("--format", cfg.format, "csv or json");
}

inline void add_alpha(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option_function<double>("--alpha", [&cfg](double a) { cfg.alpha = a; }, "level alpha");
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  RunConfig cfg;
  CLI::App app{"treewave: Gaussian waves on regular trees and their level-set percolation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  auto* profile = app.add_subcommand("profile", "covariance kernel phi(0..n) as CSV");
  add_common(profile, cfg);
  profile->add_option("--n", cfg.n, "largest distance");

  auto* ball = app.add_subcommand("sample-ball", "one exact realisation on a ball");
  add_common(ball, cfg);
  ball->add_option("--radius", cfg.radius, "ball radius");
  ball->add_option("--sampler", cfg.sampler, "dense or recursive");
  ball->add_option("--budget", cfg.budget, "maximum number of ball vertices");

  auto* path = app.add_subcommand("sample-path", "one exact realisation on a simple path");
  add_common(path, cfg);
  path->add_option("--n", cfg.n, "number of path vertices");

  auto* verify = app.add_subcommand("verify", "check wave identities on sampled balls");
  add_common(verify, cfg);
  verify->add_option("--radius", cfg.radius, "ball radius");
  verify->add_option("--reps", cfg.reps, "number of sampled balls");
  verify->add_option("--sampler", cfg.sampler, "dense, recursive or both");
  verify->add_option("--budget", cfg.budget, "maximum number of ball vertices");

  auto* gibbs = app.add_subcommand("gibbs", "Gibbs chains of a path conditioned above alpha");
  add_common(gibbs, cfg);
  add_alpha(gibbs, cfg);
  gibbs->add_option("--n", cfg.n, "number of path vertices");
  gibbs->add_option("--sweeps", cfg.sweeps, "sweeps per chain including burn-in");
  gibbs->add_option("--burnin", cfg.burnin, "burn-in sweeps");
  gibbs->add_option("--thin", cfg.thin, "keep every thin-th sweep");
  gibbs->add_option("--chains", cfg.chains, "independent chains");
  gibbs->add_option("--coordinate", cfg.coordinate, "1-based coordinate for the summary tail (0: centre)");
  gibbs->add_option("--summary", cfg.summary, "JSON summary path");

  auto* survival = app.add_subcommand("survival", "probability that a path of n vertices stays above alpha");
  add_common(survival, cfg);
  add_alpha(survival, cfg);
  survival->add_option("--n", cfg.n, "number of path vertices");
  survival->add_option("--method", cfg.method, "direct or smc");
  survival->add_option("--reps", cfg.reps, "direct Monte Carlo replicates");
  survival->add_option("--particles", cfg.particles, "SMC particles per batch");
  survival->add_option("--batches", cfg.batches, "independent SMC batches");

  auto* rate = app.add_subcommand("rate", "survival rate r(alpha) from the transfer operator");
  add_common(rate, cfg);
  rate->add_option("--alpha-min", cfg.alpha_min, "first alpha");
  rate->add_option("--alpha-max", cfg.alpha_max, "last alpha");
  rate->add_option("--steps", cfg.steps, "number of alpha values");
  rate->add_option("--m", cfg.m, "quadrature nodes per coordinate");
  rate->add_option("--offset", cfg.offset, "domain cut above max(alpha, 0)");

  auto* threshold = app.add_subcommand("threshold", "critical level alpha_c");
  add_common(threshold, cfg);
  threshold->add_option("--tol", cfg.tol, "bisection tolerance");
  threshold->add_option("--m", cfg.m, "quadrature nodes per coordinate");
  threshold->add_option("--offset", cfg.offset, "domain cut above max(alpha, 0)");

  auto* bounds = app.add_subcommand("bounds", "analytic bracket of alpha_c and quasi-Bernoulli ratios");
  add_common(bounds, cfg);
  add_alpha(bounds, cfg);
  bounds->add_flag("--ratios", cfg.ratios, "also estimate P(n+m)/(P(n)P(m)) by SMC");
  bounds->add_option("--n-list", cfg.n_list, "lengths n")->delimiter(',');
  bounds->add_option("--m-list", cfg.m_list, "lengths m")->delimiter(',');
  bounds->add_option("--particles", cfg.particles, "SMC particles per batch");
  bounds->add_option("--batches", cfg.batches, "independent SMC batches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    validate(command, cfg);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  static const std::map<std::string, std::function<void(const RunConfig&, std::ostream&)>> commands{
      {"profile", cmd_profile},   {"sample-ball", cmd_sample_ball}, {"sample-path", cmd_sample_path},
      {"verify", cmd_verify},     {"gibbs", cmd_gibbs},             {"survival", cmd_survival},
      {"rate", cmd_rate},         {"threshold", cmd_threshold},     {"bounds", cmd_bounds}};
  try {
    commands.at(command)(cfg, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace treewave::cli

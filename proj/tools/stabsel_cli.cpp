// stabsel: command-line driver for the stability-selection numerics.
//
//   path       selection-probability path over a gamma0 grid
//   se         dense-limit trace of the iteration, optionally paired with
//              median finite-size runs (--with-sa-rvamp)
//   bootstrap  naive resampled-fit reference probabilities
//   compare    per-gamma0 quantiles of |pi_a - pi_b| between two runs
//
// Every command writes its CSV outputs plus a manifest.json recording the
// argv, the fully resolved configuration, the seed, and digests of any input
// files, so a run can be reproduced bit-for-bit from the manifest alone.
// Exit codes: 0 ok, 2 configuration error, 3 numeric failure (partial
// results are still written, with failure markers).

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stabsel/baseline.hpp"
#include "stabsel/csv_data.hpp"
#include "stabsel/errors.hpp"
#include "stabsel/rng.hpp"
#include "stabsel/rvamp.hpp"
#include "stabsel/sa_rvamp.hpp"
#include "stabsel/state_evolution.hpp"
#include "stabsel/synthetic.hpp"

#ifndef STABSEL_VERSION
#define STABSEL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// small utilities

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path + "' for digest");
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

int default_workers() {
  const char* env = std::getenv("STABSEL_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long w = std::strtol(env, &end, 10);
  if (end == nullptr || *end != '\0' || w < 1)
    throw std::invalid_argument("STABSEL_WORKERS must be a positive integer, got '" +
                                std::string(env) + "'");
  return static_cast<int>(w);
}

// key=value token lists (--synth, --with-sa-rvamp)
std::map<std::string, std::string> parse_kv(const std::vector<std::string>& tokens,
                                            const std::string& what) {
  std::map<std::string, std::string> kv;
  for (const auto& tok : tokens) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
      throw std::invalid_argument(what + ": expected key=value, got '" + tok + "'");
    if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second)
      throw std::invalid_argument(what + ": duplicate key '" + tok.substr(0, eq) + "'");
  }
  return kv;
}

bool kv_take(std::map<std::string, std::string>& kv, const std::string& key, std::string& out) {
  const auto it = kv.find(key);
  if (it == kv.end()) return false;
  out = it->second;
  kv.erase(it);
  return true;
}

double kv_double(std::map<std::string, std::string>& kv, const std::string& key, double dflt,
                 const std::string& what, bool required = false) {
  std::string s;
  if (!kv_take(kv, key, s)) {
    if (required) throw std::invalid_argument(what + ": missing required key '" + key + "'");
    return dflt;
  }
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != s.size())
    throw std::invalid_argument(what + ": cannot parse " + key + "='" + s + "' as a number");
  return v;
}

int kv_int(std::map<std::string, std::string>& kv, const std::string& key, int dflt,
           const std::string& what, bool required = false) {
  const double v = kv_double(kv, key, dflt, what, required);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw std::invalid_argument(what + ": " + key + " must be an integer");
  return i;
}

void kv_done(const std::map<std::string, std::string>& kv, const std::string& what) {
  if (kv.empty()) return;
  std::string keys;
  for (const auto& [k, v] : kv) keys += (keys.empty() ? "" : ", ") + k;
  throw std::invalid_argument(what + ": unknown key(s): " + keys);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// linearly interpolated quantile of a sorted sample
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

// ---------------------------------------------------------------------------
// manifest

json law_json(const stabsel::PenaltyLaw& p) {
  json j;
  switch (p.variant) {
    case stabsel::PenaltyLaw::Variant::two_point: j["variant"] = "two-point"; break;
    case stabsel::PenaltyLaw::Variant::deterministic: j["variant"] = "deterministic"; break;
    case stabsel::PenaltyLaw::Variant::unpenalized: j["variant"] = "unpenalized"; break;
  }
  j["gamma0"] = p.gamma0;
  return j;
}

json law_json(const stabsel::OccupationLaw& o) {
  json j;
  if (o.variant == stabsel::OccupationLaw::Variant::poisson_mean_one) {
    j["variant"] = "poisson";
    j["c_max"] = o.c_max;
  } else {
    j["variant"] = "fixed";
    j["c_fixed"] = o.c_fixed;
  }
  return j;
}

json law_json(const stabsel::Likelihood& l) {
  json j;
  if (l.kind == stabsel::LikelihoodKind::logistic) {
    j["kind"] = "logistic";
  } else {
    j["kind"] = "gaussian";
    j["noise_variance"] = l.noise_variance;
  }
  return j;
}

json base_manifest(const std::string& command, const std::vector<std::string>& argv) {
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["version"] = STABSEL_VERSION;
  j["created_utc"] = utc_now();
  j["inputs"] = json::array();
  j["outputs"] = json::array();
  j["failures"] = json::array();
  return j;
}

void write_manifest(const fs::path& dir, json j, std::chrono::steady_clock::time_point t0) {
  const auto dt = std::chrono::steady_clock::now() - t0;
  j["elapsed_seconds"] = std::chrono::duration<double>(dt).count();
  if (!j.contains("status")) j["status"] = j["failures"].empty() ? "ok" : "partial";
  const fs::path p = dir / "manifest.json";
  std::ofstream out(p);
  if (!out) throw std::invalid_argument("cannot write '" + p.string() + "'");
  out << j.dump(2) << "\n";
}

std::ofstream open_csv(const fs::path& dir, const std::string& name, json& manifest) {
  const fs::path p = dir / name;
  std::ofstream out(p);
  if (!out) throw std::invalid_argument("cannot write '" + p.string() + "'");
  manifest["outputs"].push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// shared option groups

struct LawOptions {
  std::string penalty = "two-point";
  std::string occupation = "poisson";
  int occupation_count = 1;
  std::string likelihood;  // empty = command-specific default
};

void add_law_options(CLI::App* cmd, LawOptions& o, double& lik_noise) {
  cmd->add_option("--penalty", o.penalty, "penalty law on gamma (two-point | deterministic)")
      ->check(CLI::IsMember({"two-point", "deterministic"}));
  cmd->add_option("--occupation", o.occupation, "resample occupation law (poisson | fixed)")
      ->check(CLI::IsMember({"poisson", "fixed"}));
  cmd->add_option("--occupation-count", o.occupation_count,
                  "occupation number used with --occupation fixed");
  cmd->add_option("--likelihood", o.likelihood, "fit likelihood (logistic | gaussian)")
      ->check(CLI::IsMember({"logistic", "gaussian"}));
  cmd->add_option("--likelihood-noise", lik_noise,
                  "noise variance of the gaussian fit likelihood");
}

stabsel::PenaltyLaw make_penalty(const LawOptions& o, double gamma0) {
  return o.penalty == "two-point" ? stabsel::PenaltyLaw::TwoPoint(gamma0)
                                  : stabsel::PenaltyLaw::Deterministic(gamma0);
}

stabsel::OccupationLaw make_occupation(const LawOptions& o) {
  return o.occupation == "poisson" ? stabsel::OccupationLaw::PoissonMeanOne()
                                   : stabsel::OccupationLaw::Fixed(o.occupation_count);
}

stabsel::Likelihood make_likelihood(const std::string& kind, double noise) {
  return kind == "gaussian" ? stabsel::Likelihood::Gaussian(noise)
                            : stabsel::Likelihood::Logistic();
}

struct DataOptions {
  std::string path;
  std::string label = "y";
  bool log10 = false, standardize = false, intercept = false;
  std::vector<std::string> synth;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  auto* d = cmd->add_option("--data", o.path, "headered CSV with a binary label column");
  cmd->add_option("--label", o.label, "label column name");
  cmd->add_flag("--log10", o.log10, "log10-transform the raw features");
  cmd->add_flag("--standardize", o.standardize, "center and scale features to unit variance");
  cmd->add_flag("--intercept", o.intercept, "prepend an unpenalized all-ones column");
  auto* s = cmd->add_option("--synth", o.synth,
                            "synthetic instance, key=value tokens: N= rho= and alpha=|M= "
                            "[ensemble=iid|row-orthogonal channel=logistic|gaussian noise=]");
  d->excludes(s);
  s->excludes(d);
}

struct LoadedInput {
  stabsel::Dataset data;
  std::vector<std::string> feature_names;  // empty for synthetic instances
  json config;
  json inputs = json::array();
};

LoadedInput load_input(const DataOptions& o, std::uint64_t seed) {
  LoadedInput out;
  if (!o.path.empty()) {
    stabsel::PreprocessOptions opts;
    opts.label_column = o.label;
    opts.log10_features = o.log10;
    opts.standardize = o.standardize;
    opts.add_intercept = o.intercept;
    auto loaded = stabsel::load_and_preprocess(o.path, opts);
    out.data = std::move(loaded.dataset);
    out.feature_names = std::move(loaded.feature_names);
    out.config = {{"source", "csv"},        {"path", o.path},
                  {"label", o.label},       {"log10", o.log10},
                  {"standardize", o.standardize}, {"intercept", o.intercept},
                  {"rows", out.data.rows()}, {"cols", out.data.cols()}};
    out.inputs.push_back({{"path", o.path}, {"fnv1a64", fnv1a64_file(o.path)}});
    return out;
  }
  if (o.synth.empty())
    throw std::invalid_argument("need an input: --data FILE or --synth key=value ...");

  auto kv = parse_kv(o.synth, "--synth");
  const int N = kv_int(kv, "N", 0, "--synth", /*required=*/true);
  const double rho = kv_double(kv, "rho", 0.0, "--synth", /*required=*/true);
  int M = kv_int(kv, "M", -1, "--synth");
  double alpha = kv_double(kv, "alpha", -1.0, "--synth");
  std::string ensemble = "iid", channel = "logistic";
  kv_take(kv, "ensemble", ensemble);
  kv_take(kv, "channel", channel);
  const double noise = kv_double(kv, "noise", 1.0, "--synth");
  kv_done(kv, "--synth");

  if (N < 1) throw std::invalid_argument("--synth: N must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("--synth: rho must be in [0,1]");
  if ((M >= 0) == (alpha >= 0.0))
    throw std::invalid_argument("--synth: give exactly one of M= or alpha=");
  if (M < 0) M = static_cast<int>(std::lround(alpha * N));
  if (M < 1) throw std::invalid_argument("--synth: M = round(alpha N) must be >= 1");
  if (ensemble != "iid" && ensemble != "row-orthogonal")
    throw std::invalid_argument("--synth: ensemble must be iid or row-orthogonal");
  if (ensemble == "row-orthogonal" && M > N)
    throw std::invalid_argument("--synth: row-orthogonal requires M <= N");
  if (channel != "logistic" && channel != "gaussian")
    throw std::invalid_argument("--synth: channel must be logistic or gaussian");

  const auto chan = make_likelihood(channel, noise);
  auto rng = stabsel::make_rng(seed);
  out.data.A = ensemble == "iid" ? stabsel::generate_iid_gaussian(M, N, rng)
                                 : stabsel::generate_row_orthogonal(M, N, rng);
  const Eigen::VectorXd x0 = stabsel::generate_signal(N, rho, rng);
  out.data.y = stabsel::generate_responses(out.data.A, x0, chan, rng);
  out.config = {{"source", "synthetic"}, {"N", N},           {"M", M},
                {"rho", rho},            {"ensemble", ensemble}, {"channel", law_json(chan)},
                {"seed", seed}};
  return out;
}

// ---------------------------------------------------------------------------
// path

struct PathArgs {
  DataOptions data;
  LawOptions laws;
  double likelihood_noise = 1.0;
  std::vector<double> gamma0;
  int grid = 50;
  double min_ratio = 0.01;
  double damping = 1.0, eps_tol = 1e-8;
  int t_max = 500, quad_order = 33;
  double vhat_init = 1.0;
  bool force_direct = false, cold_start = false;
  std::uint64_t seed = 1;
  std::string out = ".";
};

int cmd_path(const PathArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir(a.out);
  fs::create_directories(dir);

  LoadedInput in = load_input(a.data, a.seed);
  const std::vector<double> grid =
      a.gamma0.empty() ? stabsel::default_gamma_grid(in.data, a.grid, a.min_ratio) : a.gamma0;
  if (grid.empty()) throw std::invalid_argument("path: the gamma0 grid is empty");

  stabsel::RvampConfig cfg;
  cfg.eps_tol = a.eps_tol;
  cfg.t_max = a.t_max;
  cfg.damping = a.damping;
  cfg.quad_order = a.quad_order;
  cfg.vhat_init = a.vhat_init;
  cfg.force_direct = a.force_direct;
  cfg.penalty = make_penalty(a.laws, 1.0);  // gamma0 is set per grid point
  cfg.occupation = make_occupation(a.laws);
  cfg.likelihood = make_likelihood(a.laws.likelihood.empty() ? "logistic" : a.laws.likelihood,
                                   a.likelihood_noise);
  cfg.validate();

  json manifest = base_manifest("path", argv);
  manifest["seed"] = a.seed;
  manifest["inputs"] = in.inputs;
  manifest["config"] = {{"data", in.config},
                        {"gamma0_grid", grid},
                        {"penalty", law_json(cfg.penalty)},
                        {"occupation", law_json(cfg.occupation)},
                        {"likelihood", law_json(cfg.likelihood)},
                        {"damping", cfg.damping},
                        {"eps_tol", cfg.eps_tol},
                        {"t_max", cfg.t_max},
                        {"quad_order", cfg.quad_order},
                        {"vhat_init", cfg.vhat_init},
                        {"force_direct", cfg.force_direct},
                        {"warm_start", !a.cold_start}};
  if (!in.feature_names.empty()) manifest["feature_names"] = in.feature_names;

  const auto path = stabsel::selection_path(in.data, grid, cfg, !a.cold_start);

  auto csv = open_csv(dir, "path.csv", manifest);
  csv << "gamma0,feature_index,pi,h1x,vhat1x,converged,iterations\n";
  for (const auto& pt : path.points) {
    if (pt.failed) {
      csv << fmt(pt.gamma0) << ",-1,nan,nan,nan,0," << pt.iterations << "\n";
      manifest["failures"].push_back({{"gamma0", pt.gamma0}, {"error", pt.error}});
      continue;
    }
    for (int i = 0; i < pt.pi.size(); ++i)
      csv << fmt(pt.gamma0) << ',' << i << ',' << fmt(pt.pi[i]) << ',' << fmt(pt.h1x[i]) << ','
          << fmt(pt.vhat1x[i]) << ',' << (pt.converged ? 1 : 0) << ',' << pt.iterations << "\n";
  }
  csv.close();

  write_manifest(dir, manifest, t0);
  const auto n_failed = std::count_if(path.points.begin(), path.points.end(),
                                      [](const auto& p) { return p.failed; });
  std::cout << "path: " << grid.size() << " grid points, " << in.data.cols() << " features, "
            << n_failed << " failed -> " << (dir / "path.csv").string() << "\n";
  return n_failed == 0 ? 0 : 3;
}

// ---------------------------------------------------------------------------
// se

constexpr const char* kMomentNames[16] = {"q1x", "chi1x", "v1x", "m1x", "q1z", "chi1z",
                                          "v1z", "m1z", "q2x", "chi2x", "v2x", "m2x",
                                          "q2z", "chi2z", "v2z", "m2z"};

std::array<double, 16> moment_row(const stabsel::SeMoments& m) {
  return {m.q1x, m.chi1x, m.v1x, m.m1x, m.q1z, m.chi1z, m.v1z, m.m1z,
          m.q2x, m.chi2x, m.v2x, m.m2x, m.q2z, m.chi2z, m.v2z, m.m2z};
}

std::array<double, 16> moment_row(const stabsel::SaIterationRecord& r) {
  return {r.macro.q1x, r.chi1x, r.v1x, r.macro.m1x, r.macro.q1z, r.chi1z, r.v1z, r.macro.m1z,
          r.macro.q2x, r.chi2x, r.v2x, r.macro.m2x, r.macro.q2z, r.chi2z, r.v2z, r.macro.m2z};
}

struct SeArgs {
  double alpha = 0.0, rho = 0.0, gamma0 = 1.0;
  std::string ensemble = "row-orthogonal";
  std::string channel = "logistic";
  double channel_noise = 1.0;
  LawOptions laws;
  double likelihood_noise = 1.0;
  double eps_tol = 1e-10, damping = 1.0;
  int t_max = 200, quad_order = 33, outer_order = 33;
  double vhat_init = 1.0;
  std::vector<std::string> with_sa;
  std::uint64_t seed = 1;
  int workers = 0;  // 0 = resolve from STABSEL_WORKERS
  std::string out = ".";
};

int cmd_se(const SeArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir(a.out);
  fs::create_directories(dir);

  if (a.ensemble != "row-orthogonal")
    throw std::invalid_argument("se: only the row-orthogonal ensemble has a closed spectral law");
  if (!(a.alpha > 0.0 && a.alpha <= 1.0))
    throw std::invalid_argument("se: alpha must be in (0,1]");
  if (!(a.rho > 0.0 && a.rho <= 1.0)) throw std::invalid_argument("se: rho must be in (0,1]");

  const auto spectrum = stabsel::row_orthogonal_spectrum(a.alpha);
  const auto channel = make_likelihood(a.channel, a.channel_noise);
  const auto teacher = stabsel::TeacherModel::Make(a.rho, channel, a.alpha, spectrum);

  stabsel::SeConfig cfg;
  cfg.eps_tol = a.eps_tol;
  cfg.t_max = a.t_max;
  cfg.damping = a.damping;
  cfg.quad_order = a.quad_order;
  cfg.outer_order = a.outer_order;
  cfg.vhat_init = a.vhat_init;
  cfg.penalty = make_penalty(a.laws, a.gamma0);
  cfg.occupation = make_occupation(a.laws);
  // the fit likelihood follows the channel unless set explicitly
  cfg.fit_likelihood = make_likelihood(a.laws.likelihood.empty() ? a.channel : a.laws.likelihood,
                                       a.laws.likelihood.empty() ? a.channel_noise
                                                                 : a.likelihood_noise);
  cfg.validate();

  json manifest = base_manifest("se", argv);
  manifest["seed"] = a.seed;
  manifest["config"] = {{"alpha", a.alpha},
                        {"rho", a.rho},
                        {"ensemble", a.ensemble},
                        {"channel", law_json(channel)},
                        {"fit_likelihood", law_json(cfg.fit_likelihood)},
                        {"penalty", law_json(cfg.penalty)},
                        {"occupation", law_json(cfg.occupation)},
                        {"eps_tol", cfg.eps_tol},
                        {"t_max", cfg.t_max},
                        {"damping", cfg.damping},
                        {"quad_order", cfg.quad_order},
                        {"outer_order", cfg.outer_order},
                        {"vhat_init", cfg.vhat_init}};

  stabsel::SeTrajectory traj;
  try {
    traj = stabsel::run_se(teacher, spectrum, cfg);
  } catch (const stabsel::numeric_error& e) {
    auto csv = open_csv(dir, "se_trace.csv", manifest);
    csv << "iter";
    for (const char* name : kMomentNames) csv << ',' << name;
    csv << "\n";
    manifest["failures"].push_back({{"stage", "se"}, {"error", e.what()}});
    manifest["status"] = "failed";
    write_manifest(dir, manifest, t0);
    std::cerr << "se: numeric failure: " << e.what() << "\n";
    return 3;
  }

  {
    auto csv = open_csv(dir, "se_trace.csv", manifest);
    csv << "iter";
    for (const char* name : kMomentNames) csv << ',' << name;
    csv << "\n";
    for (std::size_t t = 0; t < traj.iterations.size(); ++t) {
      csv << (t + 1);
      for (double v : moment_row(traj.iterations[t])) csv << ',' << fmt(v);
      csv << "\n";
    }
  }
  manifest["converged"] = traj.converged;
  manifest["iterations"] = traj.n_iterations;

  if (!a.with_sa.empty()) {
    auto kv = parse_kv(a.with_sa, "--with-sa-rvamp");
    const int trials = kv_int(kv, "trials", 0, "--with-sa-rvamp", /*required=*/true);
    const int N = kv_int(kv, "N", 2000, "--with-sa-rvamp");
    kv_done(kv, "--with-sa-rvamp");
    if (trials < 1) throw std::invalid_argument("--with-sa-rvamp: trials must be >= 1");
    if (N < 1) throw std::invalid_argument("--with-sa-rvamp: N must be >= 1");
    const int M = static_cast<int>(std::lround(a.alpha * N));
    if (M < 1 || M > N)
      throw std::invalid_argument("--with-sa-rvamp: M = round(alpha N) must be in [1, N]");
    const int T = static_cast<int>(traj.iterations.size());
    const int workers = a.workers > 0 ? a.workers : default_workers();

    // fixed-length runs so every trial reports the same iterations as the
    // dense-limit trace
    stabsel::RvampConfig scfg;
    scfg.eps_tol = 1e-300;
    scfg.t_max = T;
    scfg.damping = cfg.damping;
    scfg.quad_order = cfg.quad_order;
    scfg.vhat_init = cfg.vhat_init;
    scfg.penalty = cfg.penalty;
    scfg.occupation = cfg.occupation;
    scfg.likelihood = cfg.fit_likelihood;
    scfg.validate();

    struct Trial {
      std::vector<std::array<double, 16>> rows;
      std::string error;
    };
    std::vector<Trial> out(trials);
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int b = next.fetch_add(1); b < trials; b = next.fetch_add(1)) {
        try {
          auto rng = stabsel::derive_rng(a.seed, static_cast<std::uint64_t>(b));
          stabsel::Dataset d;
          d.A = stabsel::generate_row_orthogonal(M, N, rng);
          const Eigen::VectorXd x0 = stabsel::generate_signal(N, a.rho, rng);
          d.y = stabsel::generate_responses(d.A, x0, channel, rng);
          const Eigen::VectorXd z0 = d.A * x0;
          const auto res = stabsel::run_sa_rvamp(d, scfg, &x0, &z0);
          out[b].rows.reserve(res.trace.size());
          for (const auto& rec : res.trace) out[b].rows.push_back(moment_row(rec));
        } catch (const std::exception& e) {
          out[b].error = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    int n_ok = 0;
    for (int b = 0; b < trials; ++b) {
      if (out[b].error.empty()) {
        ++n_ok;
      } else {
        manifest["failures"].push_back({{"trial", b}, {"error", out[b].error}});
      }
    }
    manifest["sa_rvamp"] = {{"trials", trials}, {"trials_ok", n_ok}, {"N", N}, {"M", M},
                            {"workers", workers}};
    if (n_ok == 0) {
      manifest["status"] = "failed";
      write_manifest(dir, manifest, t0);
      std::cerr << "se: every sa-rvamp trial failed\n";
      return 3;
    }

    auto csv = open_csv(dir, "se_sa_trace.csv", manifest);
    csv << "iter";
    for (const char* name : kMomentNames) csv << ",se_" << name << ",sa_" << name;
    csv << "\n";
    std::vector<double> sample;
    sample.reserve(n_ok);
    for (int t = 0; t < T; ++t) {
      csv << (t + 1);
      const auto se_row = moment_row(traj.iterations[t]);
      for (int k = 0; k < 16; ++k) {
        sample.clear();
        for (int b = 0; b < trials; ++b)
          if (out[b].error.empty() && t < static_cast<int>(out[b].rows.size()))
            sample.push_back(out[b].rows[t][k]);
        csv << ',' << fmt(se_row[k]) << ',' << fmt(sample.empty() ? NAN : median(sample));
      }
      csv << "\n";
    }
    std::cout << "se: paired " << n_ok << "/" << trials << " trials over " << T
              << " iterations -> " << (dir / "se_sa_trace.csv").string() << "\n";
  }

  write_manifest(dir, manifest, t0);
  std::cout << "se: " << traj.n_iterations << " iterations, "
            << (traj.converged ? "converged" : "reached t_max") << " -> "
            << (dir / "se_trace.csv").string() << "\n";
  return manifest["failures"].empty() ? 0 : 3;
}

// ---------------------------------------------------------------------------
// bootstrap

struct BootstrapArgs {
  DataOptions data;
  LawOptions laws;
  double likelihood_noise = 1.0;
  std::vector<double> gamma0;
  int grid = 50;
  double min_ratio = 0.01;
  int B = 1000;
  bool multinomial = false;
  double support_rtol = 1e-10, max_failure_fraction = 0.01;
  double solver_tol = 1e-10;
  int solver_max_iters = 100000;
  std::uint64_t seed = 1;
  int workers = 0;
  std::string out = ".";
};

int cmd_bootstrap(const BootstrapArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir(a.out);
  fs::create_directories(dir);

  LoadedInput in = load_input(a.data, a.seed);
  const std::vector<double> grid =
      a.gamma0.empty() ? stabsel::default_gamma_grid(in.data, a.grid, a.min_ratio) : a.gamma0;
  if (grid.empty()) throw std::invalid_argument("bootstrap: the gamma0 grid is empty");

  stabsel::BootstrapConfig bc;
  bc.B = a.B;
  bc.seed = a.seed;
  bc.workers = a.workers > 0 ? a.workers : default_workers();
  bc.occupation = make_occupation(a.laws);
  bc.multinomial = a.multinomial;
  bc.support_rtol = a.support_rtol;
  bc.max_failure_fraction = a.max_failure_fraction;
  const auto lik = make_likelihood(a.laws.likelihood.empty() ? "logistic" : a.laws.likelihood,
                                   a.likelihood_noise);
  stabsel::SolverConfig sc;
  sc.tol = a.solver_tol;
  sc.max_iters = a.solver_max_iters;

  json manifest = base_manifest("bootstrap", argv);
  manifest["seed"] = a.seed;
  manifest["inputs"] = in.inputs;
  manifest["config"] = {{"data", in.config},
                        {"gamma0_grid", grid},
                        {"B", bc.B},
                        {"penalty", law_json(make_penalty(a.laws, 1.0))},
                        {"occupation", law_json(bc.occupation)},
                        {"likelihood", law_json(lik)},
                        {"multinomial", bc.multinomial},
                        {"support_rtol", bc.support_rtol},
                        {"max_failure_fraction", bc.max_failure_fraction},
                        {"solver_tol", sc.tol},
                        {"solver_max_iters", sc.max_iters},
                        {"workers", bc.workers}};
  if (!in.feature_names.empty()) manifest["feature_names"] = in.feature_names;

  auto csv = open_csv(dir, "bootstrap.csv", manifest);
  csv << "gamma0,feature_index,pi,std_err,count,trials\n";
  int n_failed = 0;
  for (const double g : grid) {
    bc.penalty = make_penalty(a.laws, g);
    try {
      const auto res = stabsel::bootstrap_selection_probability(in.data, bc, lik, sc);
      for (int i = 0; i < res.pi.size(); ++i)
        csv << fmt(g) << ',' << i << ',' << fmt(res.pi[i]) << ',' << fmt(res.std_err[i]) << ','
            << res.counts[i] << ',' << res.trials_used << "\n";
    } catch (const stabsel::numeric_error& e) {
      csv << fmt(g) << ",-1,nan,nan,0,0\n";
      manifest["failures"].push_back({{"gamma0", g}, {"error", e.what()}});
      ++n_failed;
    }
  }
  csv.close();

  write_manifest(dir, manifest, t0);
  std::cout << "bootstrap: B=" << a.B << " over " << grid.size() << " grid points, " << n_failed
            << " failed -> " << (dir / "bootstrap.csv").string() << "\n";
  return n_failed == 0 ? 0 : 3;
}

// ---------------------------------------------------------------------------
// compare

struct PiTable {
  std::vector<std::string> gamma_order;                    // first-seen order
  std::map<std::string, std::map<long, double>> by_gamma;  // gamma -> feature -> pi
  std::set<std::string> failed_gammas;                     // contained a failure marker
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

PiTable read_pi_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("compare: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("compare: '" + path + "' is empty");
  const auto header = split_csv_line(line);
  long ig = -1, ii = -1, ip = -1;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == "gamma0") ig = static_cast<long>(k);
    if (header[k] == "feature_index") ii = static_cast<long>(k);
    if (header[k] == "pi") ip = static_cast<long>(k);
  }
  if (ig < 0 || ii < 0 || ip < 0)
    throw std::invalid_argument("compare: '" + path +
                                "' needs columns gamma0, feature_index, pi");
  PiTable table;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<long>(cells.size()) <= std::max({ig, ii, ip}))
      throw std::invalid_argument("compare: short row " + std::to_string(row) + " in '" + path +
                                  "'");
    const std::string& g = cells[ig];
    if (table.by_gamma.find(g) == table.by_gamma.end()) table.gamma_order.push_back(g);
    auto& features = table.by_gamma[g];
    long idx = 0;
    double pi = 0.0;
    try {
      idx = std::stol(cells[ii]);
      if (idx >= 0) pi = std::stod(cells[ip]);
    } catch (const std::exception&) {
      throw std::invalid_argument("compare: cannot parse row " + std::to_string(row) + " in '" +
                                  path + "'");
    }
    if (idx < 0) {
      table.failed_gammas.insert(g);
      continue;
    }
    features[idx] = pi;
  }
  return table;
}

struct CompareArgs {
  std::string a, b;
  std::string out = ".";
};

int cmd_compare(const CompareArgs& args, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir(args.out);
  fs::create_directories(dir);

  const PiTable ta = read_pi_table(args.a);
  const PiTable tb = read_pi_table(args.b);

  json manifest = base_manifest("compare", argv);
  manifest["inputs"].push_back({{"path", args.a}, {"fnv1a64", fnv1a64_file(args.a)}});
  manifest["inputs"].push_back({{"path", args.b}, {"fnv1a64", fnv1a64_file(args.b)}});
  manifest["config"] = {{"a", args.a}, {"b", args.b}, {"quantiles", {0.5, 0.9, 0.99}}};

  // elapsed times of the producing runs, when their manifests sit next to
  // the input files
  for (const auto& [key, path] : {std::pair<std::string, std::string>{"a", args.a},
                                  std::pair<std::string, std::string>{"b", args.b}}) {
    const fs::path mp = fs::path(path).parent_path() / "manifest.json";
    std::ifstream min(mp);
    if (!min) continue;
    try {
      const json m = json::parse(min);
      manifest["input_elapsed_seconds"][key] = m.value("elapsed_seconds", 0.0);
      manifest["input_commands"][key] = m.value("command", "");
    } catch (const std::exception&) {
      // a sibling manifest.json that is not ours; ignore
    }
  }

  // gammas that failed in either file are dropped from the join
  std::vector<std::string> gammas;
  for (const auto& g : ta.gamma_order) {
    if (ta.failed_gammas.count(g) || tb.failed_gammas.count(g)) {
      manifest["failures"].push_back({{"gamma0", g}, {"error", "failure marker in input"}});
      continue;
    }
    if (tb.by_gamma.find(g) == tb.by_gamma.end())
      throw std::invalid_argument("compare: gamma0=" + g + " is missing from '" + args.b + "'");
    gammas.push_back(g);
  }
  std::size_t usable_b = 0;
  for (const auto& g : tb.gamma_order)
    if (!ta.failed_gammas.count(g) && !tb.failed_gammas.count(g)) ++usable_b;
  if (usable_b != gammas.size())
    throw std::invalid_argument("compare: '" + args.b + "' has gamma0 values missing from '" +
                                args.a + "'");
  if (gammas.empty()) throw std::invalid_argument("compare: no common gamma0 values to compare");

  auto csv = open_csv(dir, "compare.csv", manifest);
  csv << "gamma0,q50,q90,q99,max_abs_diff,n_pairs\n";
  for (const auto& g : gammas) {
    const auto& fa = ta.by_gamma.at(g);
    const auto& fb = tb.by_gamma.at(g);
    if (fa.size() != fb.size())
      throw std::invalid_argument("compare: feature sets differ at gamma0=" + g);
    std::vector<double> diffs;
    diffs.reserve(fa.size());
    for (const auto& [idx, pi_a] : fa) {
      const auto it = fb.find(idx);
      if (it == fb.end())
        throw std::invalid_argument("compare: feature sets differ at gamma0=" + g);
      diffs.push_back(std::abs(pi_a - it->second));
    }
    std::sort(diffs.begin(), diffs.end());
    const double q50 = quantile_sorted(diffs, 0.5);
    const double q90 = quantile_sorted(diffs, 0.9);
    const double q99 = quantile_sorted(diffs, 0.99);
    csv << g << ',' << fmt(q50) << ',' << fmt(q90) << ',' << fmt(q99) << ','
        << fmt(diffs.back()) << ',' << diffs.size() << "\n";
    std::cout << "gamma0=" << g << "  q50=" << fmt(q50) << "  q90=" << fmt(q90)
              << "  q99=" << fmt(q99) << "  max=" << fmt(diffs.back()) << "  n=" << diffs.size()
              << "\n";
  }
  csv.close();

  if (manifest.contains("input_elapsed_seconds")) {
    const auto& el = manifest["input_elapsed_seconds"];
    std::cout << "elapsed:";
    if (el.contains("a")) std::cout << " a=" << el["a"].get<double>() << "s";
    if (el.contains("b")) std::cout << " b=" << el["b"].get<double>() << "s";
    std::cout << "\n";
  }
  write_manifest(dir, manifest, t0);
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  const std::vector<std::string> argv_vec(argv, argv + argc);

  CLI::App app{"stability-selection numerics driver"};
  app.set_version_flag("--version", STABSEL_VERSION);
  app.require_subcommand(1);

  PathArgs pa;
  auto* path = app.add_subcommand("path", "selection-probability path over a gamma0 grid");
  add_data_options(path, pa.data);
  add_law_options(path, pa.laws, pa.likelihood_noise);
  path->add_option("--gamma0", pa.gamma0, "explicit gamma0 grid (overrides --grid)");
  path->add_option("--grid", pa.grid, "number of log-spaced grid points");
  path->add_option("--min-ratio", pa.min_ratio, "smallest gamma0 as a fraction of gamma_max");
  path->add_option("--damping", pa.damping, "field update damping in (0,1]");
  path->add_option("--eps-tol", pa.eps_tol, "convergence tolerance");
  path->add_option("--t-max", pa.t_max, "iteration cap per grid point");
  path->add_option("--quad-order", pa.quad_order, "quadrature order for the logistic averages");
  path->add_option("--vhat-init", pa.vhat_init, "initial resampling-noise variance");
  path->add_flag("--force-direct", pa.force_direct, "bypass the M x M kernel fast path");
  path->add_flag("--cold-start", pa.cold_start, "do not warm-start along the grid");
  path->add_option("--seed", pa.seed, "seed for synthetic data");
  path->add_option("--out", pa.out, "output directory");

  SeArgs sa;
  auto* se = app.add_subcommand("se", "dense-limit trace of the iteration");
  se->add_option("--alpha", sa.alpha, "aspect ratio M/N")->required();
  se->add_option("--rho", sa.rho, "signal density")->required();
  se->add_option("--gamma0", sa.gamma0, "penalty scale");
  se->add_option("--ensemble", sa.ensemble, "design ensemble (row-orthogonal)");
  se->add_option("--channel", sa.channel, "teacher channel (logistic | gaussian)")
      ->check(CLI::IsMember({"logistic", "gaussian"}));
  se->add_option("--channel-noise", sa.channel_noise, "gaussian teacher noise variance");
  add_law_options(se, sa.laws, sa.likelihood_noise);
  se->add_option("--eps-tol", sa.eps_tol, "convergence tolerance");
  se->add_option("--t-max", sa.t_max, "iteration cap");
  se->add_option("--damping", sa.damping, "field update damping in (0,1]");
  se->add_option("--quad-order", sa.quad_order, "inner quadrature order");
  se->add_option("--outer-order", sa.outer_order, "outer quadrature order");
  se->add_option("--vhat-init", sa.vhat_init, "initial resampling-noise variance");
  se->add_option("--with-sa-rvamp", sa.with_sa,
                 "pair with median finite-size runs, key=value tokens: trials= [N=]");
  se->add_option("--seed", sa.seed, "base seed for the finite-size trials");
  se->add_option("--workers", sa.workers, "worker threads (default $STABSEL_WORKERS or 1)");
  se->add_option("--out", sa.out, "output directory");

  BootstrapArgs ba;
  auto* boot = app.add_subcommand("bootstrap", "resampled-fit reference probabilities");
  add_data_options(boot, ba.data);
  add_law_options(boot, ba.laws, ba.likelihood_noise);
  boot->add_option("--B", ba.B, "number of resamples");
  boot->add_option("--gamma0", ba.gamma0, "explicit gamma0 grid (overrides --grid)");
  boot->add_option("--grid", ba.grid, "number of log-spaced grid points");
  boot->add_option("--min-ratio", ba.min_ratio, "smallest gamma0 as a fraction of gamma_max");
  boot->add_flag("--multinomial", ba.multinomial, "exact multinomial resampling");
  boot->add_option("--support-rtol", ba.support_rtol, "support detection threshold");
  boot->add_option("--max-failure-fraction", ba.max_failure_fraction,
                   "abort when more fits fail");
  boot->add_option("--solver-tol", ba.solver_tol, "proximal-gradient relative tolerance");
  boot->add_option("--solver-max-iters", ba.solver_max_iters, "proximal-gradient iteration cap");
  boot->add_option("--seed", ba.seed, "resampling seed");
  boot->add_option("--workers", ba.workers, "worker threads (default $STABSEL_WORKERS or 1)");
  boot->add_option("--out", ba.out, "output directory");

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "per-gamma0 quantiles of |pi_a - pi_b|");
  cmp->add_option("--a", ca.a, "first run (e.g. path.csv)")->required();
  cmp->add_option("--b", ca.b, "second run (e.g. bootstrap.csv)")->required();
  cmp->add_option("--out", ca.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // string parse problems are configuration errors
  }

  try {
    if (path->parsed()) return cmd_path(pa, argv_vec);
    if (se->parsed()) return cmd_se(sa, argv_vec);
    if (boot->parsed()) return cmd_bootstrap(ba, argv_vec);
    if (cmp->parsed()) return cmd_compare(ca, argv_vec);
  } catch (const stabsel::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

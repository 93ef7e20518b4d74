// convkernel: command-line front end for kernel learning, masked tensor
// factorization, synthetic data, trip aggregation and evaluation.
//
// Exit codes: 0 success, 1 invalid input or I/O failure, 2 solver failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "convkernel/data_io.hpp"
#include "convkernel/error.hpp"
#include "convkernel/kernel_learn.hpp"
#include "convkernel/tensorfact.hpp"

namespace fs = std::filesystem;
using namespace convkernel;

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitSolver = 2;

struct KernelLearnOpts {
  std::string input;
  std::string regime = "uni";
  std::size_t tau = 1;
  bool mean_center = false;
  std::size_t max_iter = 30;
  double min_decrease = 0.0;
  std::string selection = "magnitude";
  double nnls_tol = 1e-10;
  std::size_t time_axis = 0;  // 0 = last mode
  std::string output;
};

struct FactorizeOpts {
  std::string input;
  std::size_t rank = 1;
  double gamma = 0.0;
  std::string kernel_w, kernel_u, kernel_v;
  double missing_rate = 0.0;
  std::vector<std::uint64_t> seeds{0};
  double cg_tol = 1e-8;
  std::size_t cg_iters = 100;
  std::size_t outer_iters = 50;
  double outer_tol = 1e-6;
  double ridge = 1e-8;
  std::string output;
};

struct SynthOpts {
  std::string shape;
  std::vector<std::string> periods;
  double noise = 0.0;
  double drift = 0.0;
  std::uint64_t seed = 0;
  std::size_t rank = 0;
  std::string output;
};

struct TripsOpts {
  std::string input;
  std::size_t zones = 0;
  std::string start;
  std::size_t hours = 0;
  std::int64_t zone_offset = 0;
  std::string pickup_col = "PULocationID";
  std::string dropoff_col = "DOLocationID";
  std::string time_col;
  std::string output;
};

struct EvalOpts {
  std::string estimate;
  std::string truth;
  std::string mask;
  double missing_rate = -1.0;
  std::uint64_t mask_seed = 0;
};

std::vector<std::size_t> parse_shape(const std::string& s) {
  std::vector<std::size_t> dims;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != part.size() || v == 0) throw InvalidArgument("bad shape \"" + s + "\", expected e.g. 6x6x504");
    dims.push_back(static_cast<std::size_t>(v));
  }
  if (dims.empty()) throw InvalidArgument("empty shape");
  return dims;
}

SeasonalComponent parse_period(const std::string& s) {
  const auto colon = s.find(':');
  try {
    std::size_t pos = 0;
    SeasonalComponent c;
    c.period = static_cast<std::size_t>(std::stoull(s.substr(0, colon), &pos));
    c.amplitude = colon == std::string::npos ? 1.0 : std::stod(s.substr(colon + 1));
    return c;
  } catch (const std::exception&) {
    throw InvalidArgument("bad period \"" + s + "\", expected PERIOD[:AMPLITUDE]");
  }
}

/// Writes the resolved settings of the invoked subcommand so the run can be
/// repeated with `convkernel --config <file>`.
void write_config_echo(const CLI::App& app, const fs::path& path) {
  // Subcommands that did not run are emitted as dotted keys; leave them out.
  std::istringstream all(app.config_to_str(true, false));
  std::string echo, line;
  while (std::getline(all, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && line.substr(0, eq).find('.') != std::string::npos) continue;
    echo += line + "\n";
  }
  write_text_file(path, echo);
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---- kernel learn -------------------------------------------------------------

int run_kernel_learn(const KernelLearnOpts& o, const CLI::App& app) {
  const auto regime = parse_regime(o.regime);
  if (!regime) throw InvalidArgument("unknown regime \"" + o.regime + "\" (use uni, multi or tensor)");
  const fs::path in(o.input);
  if (!fs::exists(in)) throw IoError("input file not found: " + o.input);

  DenseTensor data;
  if (in.extension() == ".dnt") {
    data = read_dnt(in);
  } else {
    if (*regime == Regime::tensor3) throw InvalidArgument("tensor regime needs a .dnt input");
    data = parse_csv_series(read_text_file(in),
                            *regime == Regime::univariate ? CsvLayout::univariate : CsvLayout::rows_are_series,
                            in.string())
               .data();
  }
  const std::size_t expected_order = *regime == Regime::univariate ? 1 : *regime == Regime::multivariate ? 2 : 3;
  if (data.order() != expected_order) {
    throw InvalidArgument("regime " + std::string(regime_name(*regime)) + " needs an order-" +
                          std::to_string(expected_order) + " input, " + o.input + " has order " +
                          std::to_string(data.order()));
  }
  SeriesBundle bundle = o.time_axis == 0 || o.time_axis == data.order()
                            ? SeriesBundle(*regime, std::move(data))
                            : bundle_along_mode(data, o.time_axis);
  if (o.mean_center) bundle = mean_centered(bundle);

  const auto selection = parse_selection(o.selection);
  if (!selection) throw InvalidArgument("unknown selection '" + o.selection + "' (magnitude | positive)");
  LearnConfig cfg;
  cfg.solver.selection = *selection;
  cfg.solver.max_iter = o.max_iter;
  cfg.solver.min_decrease = o.min_decrease;
  cfg.solver.nnls.tol = o.nnls_tol;
  const SparseKernel k = learn_kernel(bundle, o.tau, cfg);

  nlohmann::json config = {{"input", o.input},           {"mean_center", o.mean_center},
                           {"max_iter", o.max_iter},     {"min_decrease", o.min_decrease},
                           {"selection", o.selection},
                           {"nnls_tol", o.nnls_tol},     {"time_axis", o.time_axis},
                           {"series", bundle.series_count()}, {"iterations", k.iterations}};
  write_kernel_json(o.output, {k, std::string(regime_name(*regime)), config.dump()});
  write_config_echo(app, fs::path(o.output).string() + ".config.toml");

  std::cout << "kernel: T=" << k.length << " tau=" << k.tau << " regime=" << regime_name(*regime)
            << " series=" << bundle.series_count() << " iterations=" << k.iterations << "\n";
  for (std::size_t i = 0; i < k.support.size(); ++i) {
    std::cout << "  lag " << k.support[i] << " (t=" << k.support[i] + 1 << ")  weight " << fmt(k.weights[i], "%.6f")
              << "\n";
  }
  std::cout << "loss: " << fmt(k.loss, "%.6e") << "\n";
  if (k.degenerate) std::cerr << "warning: every series is constant; returned the lag-1 kernel\n";
  if (k.full_support) std::cerr << "warning: tau = T-1, solved plain NNLS over every lag\n";
  if (k.support.size() < k.tau && !k.degenerate) {
    std::cerr << "warning: only " << k.support.size() << " nonzero weights (tau=" << k.tau << ")\n";
    if (*selection == Selection::magnitude) {
      std::cerr << "note: the largest |correlations| may be negative; --selection positive skips those lags\n";
    }
  }
  std::cout << "wrote " << o.output << "\n";
  return 0;
}

// ---- tensor factorize ---------------------------------------------------------------

std::optional<std::vector<double>> load_kernel(const std::string& path, std::size_t dim, const char* mode) {
  if (path.empty()) return std::nullopt;
  const KernelRecord rec = read_kernel_json(path);
  if (rec.kernel.length != dim) {
    throw InvalidArgument(std::string("kernel for mode ") + mode + " (" + path + ") has length " +
                          std::to_string(rec.kernel.length) + " but the tensor dimension is " + std::to_string(dim));
  }
  return kernel_to_theta(rec.kernel);
}

struct Stats {
  double mean = NAN, sd = NAN;
  std::size_t n = 0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  for (double x : v) {
    if (std::isfinite(x)) ++s.n;
  }
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) sum += x;
  }
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) ss += (x - s.mean) * (x - s.mean);
  }
  s.sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  return s;
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CONVKERNEL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

double rse_or_nan(const DenseTensor& est, const DenseTensor& truth, const ObservationMask& mask, Projection p) {
  const std::size_t obs = mask.observed_count();
  if (p == Projection::missing && obs == mask.size()) return NAN;
  if (p == Projection::observed && obs == 0) return NAN;
  return rse(est, truth, mask, p);
}

int run_factorize(const FactorizeOpts& o, const CLI::App& app) {
  if (!fs::exists(o.input)) throw IoError("input file not found: " + o.input);
  const DenseTensor y = read_dnt(o.input);
  const Shape3 shape = shape3(y);
  ModeKernels kernels;
  kernels.w = load_kernel(o.kernel_w, shape[0], "w");
  kernels.u = load_kernel(o.kernel_u, shape[1], "u");
  kernels.v = load_kernel(o.kernel_v, shape[2], "v");
  if (o.rank < 1) throw InvalidArgument("rank must be at least 1");
  if (!(o.gamma >= 0.0)) throw InvalidArgument("gamma must be non-negative");
  if (!(o.missing_rate >= 0.0 && o.missing_rate < 1.0)) throw InvalidArgument("missing rate must lie in [0, 1)");
  if (o.seeds.empty()) throw InvalidArgument("at least one seed is required");

  fs::create_directories(o.output);
  const fs::path out_dir(o.output);
  write_config_echo(app, out_dir / "config.toml");

  std::vector<SeedResult> results(o.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < o.seeds.size(); i = next++) {
      SeedResult& r = results[i];
      r.seed = o.seeds[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const ObservationMask mask = make_mask(shape, o.missing_rate, r.seed);
        TfConfig cfg;
        cfg.cg_tol = o.cg_tol;
        cfg.cg_iters = o.cg_iters;
        cfg.outer_iters = o.outer_iters;
        cfg.outer_tol = o.outer_tol;
        cfg.ridge = o.ridge;
        cfg.seed = r.seed;
        DenseTensor observed = y;
        mask.project(observed.data());
        const FitReport fit = tf_fit(observed, mask, o.rank, o.gamma, kernels, cfg);
        const DenseTensor est = fit.model.reconstruct();
        r.rse_observed = rse_or_nan(est, y, mask, Projection::observed);
        r.rse_missing = rse_or_nan(est, y, mask, Projection::missing);
        r.rse_all = rse(est, y, mask, Projection::all);
        r.objective = fit.objective_history.back();
        r.iterations = fit.outer_iterations;
        write_dnt(out_dir / ("recon_seed" + std::to_string(r.seed) + ".dnt"), est);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(log_mu);
      if (r.error.empty()) {
        std::cerr << "seed " << r.seed << ": rse_missing="
                  << (std::isnan(r.rse_missing) ? std::string("n/a") : fmt(r.rse_missing, "%.4f"))
                  << " rse_all=" << fmt(r.rse_all, "%.4f") << " iterations=" << r.iterations << "\n";
      } else {
        std::cerr << "seed " << r.seed << " failed: " << r.error << "\n";
      }
    }
  };
  const std::size_t nthreads = worker_count(o.seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(results.begin(), results.end(), [](const SeedResult& a, const SeedResult& b) { return a.seed < b.seed; });
  {
    std::ofstream csv(out_dir / "results.csv");
    if (!csv) throw IoError("cannot write " + (out_dir / "results.csv").string());
    write_results_csv(csv, results);
  }

  std::vector<double> obs, mis, all;
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (!r.error.empty()) {
      ++failed;
      continue;
    }
    obs.push_back(r.rse_observed);
    mis.push_back(r.rse_missing);
    all.push_back(r.rse_all);
  }
  auto show = [](const char* name, const Stats& s) {
    std::cout << "  " << name << ": ";
    if (s.n == 0) {
      std::cout << "n/a\n";
    } else {
      std::cout << fmt(s.mean, "%.2f") << " ± " << fmt(s.sd, "%.2f") << "\n";
    }
  };
  std::cout << "RSE over " << results.size() - failed << " of " << results.size() << " seeds (rank " << o.rank
            << ", gamma " << fmt(o.gamma) << ", missing " << fmt(100.0 * o.missing_rate, "%.0f") << "%)\n";
  show("missing ", stats(mis));
  show("observed", stats(obs));
  show("all     ", stats(all));
  std::cout << "wrote " << (out_dir / "results.csv").string() << "\n";
  if (failed > 0) {
    std::cerr << failed << " seed(s) failed; see results.csv\n";
    return kExitSolver;
  }
  return 0;
}

// ---- synth / trips / eval -------------------------------------------------------------

int run_synth(const SynthOpts& o, const CLI::App& app) {
  SynthConfig cfg;
  cfg.dims = parse_shape(o.shape);
  for (const auto& p : o.periods) cfg.components.push_back(parse_period(p));
  cfg.noise_sigma = o.noise;
  cfg.drift_sigma = o.drift;
  cfg.seed = o.seed;
  cfg.rank = o.rank;
  const DenseTensor t = synth_seasonal(cfg);
  write_dnt(o.output, t);
  write_config_echo(app, o.output + ".config.toml");
  std::cout << "wrote " << o.output << " (" << o.shape << ")\n";
  return 0;
}

int run_trips(const TripsOpts& o, const CLI::App& app) {
  const auto start = parse_timestamp(o.start);
  if (!start) throw InvalidArgument("cannot parse start time \"" + o.start + "\"");
  std::ifstream in(o.input);
  if (!in) throw IoError("cannot open " + o.input);
  TripSchema schema;
  schema.pickup_zone = o.pickup_col;
  schema.dropoff_zone = o.dropoff_col;
  if (!o.time_col.empty()) schema.pickup_time = {o.time_col};
  schema.zone_offset = o.zone_offset;
  const TripAggregate agg = aggregate_trip_csv(in, o.zones, *start, o.hours, schema);
  write_dnt(o.output, agg.counts);
  write_config_echo(app, o.output + ".config.toml");
  std::cout << "accepted " << agg.accepted << ", skipped " << agg.skipped << " (outside window), malformed "
            << agg.malformed << "\n";
  for (const auto& m : agg.malformed_examples) std::cerr << "malformed: " << m << "\n";
  std::cout << "wrote " << o.output << " (" << o.zones << "x" << o.zones << "x" << o.hours << ", window from "
            << format_timestamp(*start) << ")\n";
  return 0;
}

int run_eval(const EvalOpts& o) {
  const DenseTensor est = read_dnt(o.estimate);
  const DenseTensor truth = read_dnt(o.truth);
  if (est.dims() != truth.dims()) throw InvalidArgument("estimate and truth differ in shape");
  const Shape3 shape = shape3(truth);
  ObservationMask mask(shape, true);
  if (!o.mask.empty()) {
    const DenseTensor m = read_dnt(o.mask);
    if (m.dims() != truth.dims()) throw InvalidArgument("mask and truth differ in shape");
    for (std::size_t i = 0; i < m.size(); ++i) mask.set(i, m[i] != 0.0);
  } else if (o.missing_rate >= 0.0) {
    mask = make_mask(shape, o.missing_rate, o.mask_seed);
  }
  auto line = [&](const char* name, Projection p) {
    const double v = rse_or_nan(est, truth, mask, p);
    std::cout << "rse_" << name << " " << (std::isfinite(v) ? fmt(v, "%.10g") : std::string("n/a")) << "\n";
  };
  line("observed", Projection::observed);
  line("missing", Projection::missing);
  line("all", Projection::all);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse convolutional kernel learning and kernel-regularized tensor factorization"};
  app.set_config("--config", "", "Read settings from a TOML/INI file (such as a config echo)");
  app.require_subcommand(1);

  auto* kernel = app.add_subcommand("kernel", "Temporal kernel learning");
  kernel->require_subcommand(1);
  KernelLearnOpts kl;
  auto* learn = kernel->add_subcommand("learn", "Learn a sparse non-negative kernel from series");
  learn->add_option("--input", kl.input, "Series file (.csv or .dnt)")->required();
  learn->add_option("--regime", kl.regime, "uni | multi | tensor")->capture_default_str();
  learn->add_option("--tau", kl.tau, "Sparsity level")->required();
  learn->add_flag("--mean-center", kl.mean_center, "Subtract each series' mean first");
  learn->add_option("--max-iter", kl.max_iter, "Pursuit iteration cap")->capture_default_str();
  learn->add_option("--min-decrease", kl.min_decrease, "Required residual drop per iteration")->capture_default_str();
  learn->add_option("--selection", kl.selection, "Candidate rule: magnitude | positive")->capture_default_str();
  learn->add_option("--nnls-tol", kl.nnls_tol, "NNLS KKT tolerance")->capture_default_str();
  learn->add_option("--time-axis", kl.time_axis, "1-based mode used as time (default: last)")->capture_default_str();
  learn->add_option("--output", kl.output, "Kernel JSON path")->required();

  auto* tensor = app.add_subcommand("tensor", "Tensor factorization");
  tensor->require_subcommand(1);
  FactorizeOpts fo;
  auto* factorize = tensor->add_subcommand("factorize", "Masked CP factorization with kernel regularizers");
  factorize->add_option("--input", fo.input, "Tensor (.dnt, order 3)")->required();
  factorize->add_option("--rank", fo.rank, "CP rank R")->required();
  factorize->add_option("--gamma", fo.gamma, "Regularization weight")->capture_default_str();
  factorize->add_option("--kernel-w", fo.kernel_w, "Kernel JSON for mode 1");
  factorize->add_option("--kernel-u", fo.kernel_u, "Kernel JSON for mode 2");
  factorize->add_option("--kernel-v", fo.kernel_v, "Kernel JSON for mode 3");
  factorize->add_option("--missing-rate", fo.missing_rate, "Fraction of entries hidden")->capture_default_str();
  factorize->add_option("--seeds", fo.seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
  factorize->add_option("--cg-tol", fo.cg_tol)->capture_default_str();
  factorize->add_option("--cg-iters", fo.cg_iters)->capture_default_str();
  factorize->add_option("--outer-iters", fo.outer_iters)->capture_default_str();
  factorize->add_option("--outer-tol", fo.outer_tol)->capture_default_str();
  factorize->add_option("--ridge", fo.ridge)->capture_default_str();
  factorize->add_option("--output", fo.output, "Output directory")->required();

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic seasonal tensor");
  synth->add_option("--shape", so.shape, "Dims such as 6x6x504 (time last)")->required();
  synth->add_option("--period", so.periods, "PERIOD[:AMPLITUDE], repeatable")->required();
  synth->add_option("--noise", so.noise, "Gaussian noise sigma")->capture_default_str();
  synth->add_option("--drift", so.drift, "Random-walk step sigma per fiber")->capture_default_str();
  synth->add_option("--seed", so.seed)->capture_default_str();
  synth->add_option("--rank", so.rank, "Build as a sum of R outer products (order 3)")->capture_default_str();
  synth->add_option("--output", so.output, "Output .dnt")->required();

  auto* trips = app.add_subcommand("trips", "Trip record processing");
  trips->require_subcommand(1);
  TripsOpts to;
  auto* aggregate = trips->add_subcommand("aggregate", "Count trips into a zones x zones x hours tensor");
  aggregate->add_option("--input", to.input, "Trip CSV with header")->required();
  aggregate->add_option("--zones", to.zones, "Number of zones")->required();
  aggregate->add_option("--start", to.start, "Window start (UTC)")->required();
  aggregate->add_option("--hours", to.hours, "Window length in hours")->required();
  aggregate->add_option("--zone-offset", to.zone_offset, "Subtracted from zone ids")->capture_default_str();
  aggregate->add_option("--pickup-col", to.pickup_col)->capture_default_str();
  aggregate->add_option("--dropoff-col", to.dropoff_col)->capture_default_str();
  aggregate->add_option("--time-col", to.time_col, "Pickup time column (default: TLC names)");
  aggregate->add_option("--output", to.output, "Output .dnt")->required();

  auto* eval = app.add_subcommand("eval", "Evaluation");
  eval->require_subcommand(1);
  EvalOpts eo;
  auto* rse_cmd = eval->add_subcommand("rse", "RSE on observed, missing and all entries");
  rse_cmd->add_option("--estimate", eo.estimate)->required();
  rse_cmd->add_option("--truth", eo.truth)->required();
  rse_cmd->add_option("--mask", eo.mask, "Mask .dnt (nonzero = observed)");
  rse_cmd->add_option("--missing-rate", eo.missing_rate, "Regenerate the mask from a rate and seed");
  rse_cmd->add_option("--mask-seed", eo.mask_seed);

  for (auto* sub : {kernel, learn, tensor, factorize, synth, trips, aggregate, eval, rse_cmd}) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*learn) return run_kernel_learn(kl, app);
    if (*factorize) return run_factorize(fo, app);
    if (*synth) return run_synth(so, app);
    if (*aggregate) return run_trips(to, app);
    if (*rse_cmd) return run_eval(eo);
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

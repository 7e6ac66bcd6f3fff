// Command-line front end: fit, test, benchmark.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcovica/dcovica.hpp"

using json = nlohmann::ordered_json;
using namespace dcovica;

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitNonConvergence = 4;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::uint64_t h = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json manifest(const std::string& command, const std::string& input, std::uint64_t seed,
              int threads, const json& config, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["input"] = input;
  m["input_fnv1a64"] = input.empty() ? "" : fnv1a64_file(input);
  m["seed"] = seed;
  m["threads"] = resolve_threads(threads);
  m["config"] = config;
  m["timestamp"] = iso_timestamp();
  m["outputs"] = outputs;
  return m;
}

json matrix_json(const MatrixX<double>& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const VectorX<double>& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

MatrixX<double> matrix_from_json(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j.at(0).size());
  MatrixX<double> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

VectorX<double> vector_from_json(const json& j) {
  VectorX<double> v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw csv_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

struct FitArgs {
  std::string input;
  std::string out_prefix = "dcovica";
  std::string estimator = "pitdcov";
  std::string mode = "joint";
  Index starts = 1000;
  double bandwidth_scale = 1.0;
  Index max_iters = 0;
  double f_tol = 1e-8;
  std::uint64_t seed = 1;
  bool standardize = false;
  int threads = 0;
};

FitOptions to_options(const FitArgs& a) {
  FitOptions o;
  o.estimator = a.estimator == "dcov" ? EstimatorKind::dcov : EstimatorKind::pitdcov;
  o.mode = a.mode == "sequential" ? FitMode::sequential : FitMode::joint;
  o.n_starts = a.starts;
  o.bandwidth_scale = a.bandwidth_scale;
  o.max_iters = a.max_iters;
  o.f_tol = a.f_tol;
  o.seed = a.seed;
  o.threads = a.threads;
  return o;
}

json options_json(const FitArgs& a) {
  json o;
  o["estimator"] = a.estimator;
  o["mode"] = a.mode;
  o["starts"] = a.starts;
  o["bandwidth_scale"] = a.bandwidth_scale;
  o["max_iters"] = a.max_iters;
  o["f_tol"] = a.f_tol;
  o["standardize"] = a.standardize;
  return o;
}

int run_fit(const FitArgs& args, const std::string& command) {
  CsvTable table = read_csv(args.input);
  if (table.n_dropped > 0)
    std::cerr << "note: dropped " << table.n_dropped << " rows with missing cells\n";
  if (table.data.cols() < 2) {
    std::cerr << "error: need at least 2 columns, got " << table.data.cols() << "\n";
    return kExitBadInput;
  }
  if (table.data.rows() < 3) {
    std::cerr << "error: need at least 3 rows, got " << table.data.rows() << "\n";
    return kExitBadInput;
  }

  auto [centered, mean] = center(table.data);
  VectorX<double> sds;
  MatrixX<double> x = centered;
  if (args.standardize) {
    auto std_result = standardize_columns(x);
    x = std_result.first;
    sds = std_result.second;
  }
  auto [z, wh] = whiten(x);
  IcaObjective<double> obj(std::move(z));
  const FitOptions opts = to_options(args);
  IcaFit<double> fit = opts.mode == FitMode::joint ? fit_joint(obj, opts, &wh.uncorrelating)
                                                   : fit_sequential(obj, opts, &wh.uncorrelating);

  const std::string fit_path = args.out_prefix + "_fit.json";
  const std::string sources_path = args.out_prefix + "_sources.csv";

  json out;
  out["manifest"] = manifest(command, args.input, args.seed, args.threads, options_json(args),
                             {fit_path, sources_path});
  out["n"] = table.data.rows();
  out["d"] = table.data.cols();
  out["n_dropped_rows"] = table.n_dropped;
  out["columns"] = table.columns;
  out["options"] = options_json(args);
  out["preprocess"]["mean"] = vector_json(mean);
  out["preprocess"]["sds"] = args.standardize ? vector_json(sds) : json();
  out["whitening"]["uncorrelating"] = matrix_json(wh.uncorrelating);
  out["whitening"]["eigenvalues"] = vector_json(wh.eigenvalues);
  out["fit"]["theta"] = vector_json(fit.theta);
  out["fit"]["w"] = matrix_json(fit.w);
  out["fit"]["mixing"] = matrix_json(fit.mixing);
  out["fit"]["objective"] = fit.objective;
  out["fit"]["converged"] = fit.converged;
  out["fit"]["starts_evaluated"] = fit.starts_evaluated;
  out["sources_csv"] = sources_path;
  write_json(fit_path, out);

  std::vector<std::string> names;
  for (Index k = 0; k < fit.sources.cols(); ++k) names.push_back("s" + std::to_string(k + 1));
  write_csv(sources_path, fit.sources, names);

  std::cout << "fit written to " << fit_path << " (objective " << format_double(fit.objective)
            << (fit.converged ? "" : ", NOT converged") << ")\n";
  return fit.converged ? 0 : kExitNonConvergence;
}

struct TestArgs {
  std::string input;
  std::string kind = "mutual";
  std::string fit_json;
  std::string out_path = "dcovica_test.json";
  Index n_perm = 1999;
  Index lags = 12;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;
  bool no_signed_perm = false;
};

int run_test(const TestArgs& args, const std::string& command) {
  json out;
  json config;
  config["kind"] = args.kind;
  config["n_perm"] = args.n_perm;

  if (args.kind == "mutual" || args.kind == "serial") {
    CsvTable table = read_csv(args.input);
    if (table.n_dropped > 0)
      std::cerr << "note: dropped " << table.n_dropped << " rows with missing cells\n";
    TestResult<double> res;
    if (args.kind == "mutual") {
      res = permutation_test_mutual(table.data, args.n_perm, args.seed, args.threads);
    } else {
      config["lags"] = args.lags;
      res = serial_test(table.data, args.lags, args.n_perm, args.seed, args.threads);
    }
    out["manifest"] = manifest(command, args.input, args.seed, args.threads, config,
                               {args.out_path});
    out["kind"] = args.kind;
    out["statistic"] = res.statistic;
    out["p_value"] = res.p_value;
    out["n_replicates"] = res.n_replicates;
    json reps = json::array();
    for (double v : res.replicate_stats) reps.push_back(v);
    out["replicates"] = reps;
  } else if (args.kind == "existence") {
    if (args.fit_json.empty()) {
      std::cerr << "error: --kind existence requires --fit fit.json\n";
      return kExitBadInput;
    }
    std::ifstream in(args.fit_json);
    if (!in) {
      std::cerr << "error: cannot open " << args.fit_json << "\n";
      return kExitBadInput;
    }
    json fj = json::parse(in);

    IcaFit<double> fit;
    fit.w = matrix_from_json(fj.at("fit").at("w"));
    fit.theta = vector_from_json(fj.at("fit").at("theta"));
    fit.mixing = matrix_from_json(fj.at("fit").at("mixing"));
    fit.uncorrelating = matrix_from_json(fj.at("whitening").at("uncorrelating"));
    CsvTable sources = read_csv(fj.at("sources_csv").get<std::string>());
    fit.sources = sources.data;

    FitArgs fa;
    fa.estimator = fj.at("options").at("estimator").get<std::string>();
    fa.mode = fj.at("options").at("mode").get<std::string>();
    fa.starts = fj.at("options").at("starts").get<Index>();
    fa.bandwidth_scale = fj.at("options").at("bandwidth_scale").get<double>();
    fa.max_iters = fj.at("options").at("max_iters").get<Index>();
    fa.f_tol = fj.at("options").at("f_tol").get<double>();
    fa.standardize = fj.at("options").at("standardize").get<bool>();
    fa.seed = args.seed;
    fa.threads = args.threads;
    const FitOptions opts = to_options(fa);

    config["n_resamples"] = args.n_perm;
    config["alpha"] = args.alpha;
    config["signed_permutation"] = !args.no_signed_perm;
    config["inner_starts"] = 100;

    const auto draws = resample_draws(fit, opts, args.n_perm, args.seed, 100,
                                      !args.no_signed_perm, fa.standardize, args.threads);
    TestResult<double> res;
    res.seed = args.seed;
    res.statistic = mutual_independence_stat(fit.sources);
    std::vector<double> dists;
    for (const auto& d : draws) {
      if (d.ok) {
        res.replicate_stats.push_back(d.u_stat);
        dists.push_back(d.mixing_dist);
      } else {
        ++res.n_dropped;
      }
    }
    if (res.replicate_stats.empty()) {
      std::cerr << "error: every resampling refit failed\n";
      return kExitNonConvergence;
    }
    res.n_replicates = static_cast<Index>(res.replicate_stats.size());
    res.p_value = detail::add_one_p_value(res.statistic, res.replicate_stats);

    std::sort(dists.begin(), dists.end(), std::greater<double>());
    Index k = static_cast<Index>(std::floor(static_cast<double>(dists.size()) * args.alpha + 1e-12));
    k = std::max<Index>(1, std::min<Index>(k, static_cast<Index>(dists.size())));
    const double c_alpha = dists[static_cast<std::size_t>(k - 1)];

    out["manifest"] = manifest(command, args.fit_json, args.seed, args.threads, config,
                               {args.out_path});
    out["kind"] = "existence";
    out["statistic"] = res.statistic;
    out["p_value"] = res.p_value;
    out["n_replicates"] = res.n_replicates;
    out["n_dropped"] = res.n_dropped;
    out["confidence_radius"] = {{"alpha", args.alpha}, {"c_alpha", c_alpha}};
    json reps = json::array();
    for (double v : res.replicate_stats) reps.push_back(v);
    out["replicates"] = reps;
  } else {
    std::cerr << "error: unknown test kind '" << args.kind << "'\n";
    return kExitBadInput;
  }

  write_json(args.out_path, out);
  std::cout << "test written to " << args.out_path << " (statistic "
            << format_double(out.at("statistic").get<double>()) << ", p "
            << format_double(out.at("p_value").get<double>()) << ")\n";
  return 0;
}

struct BenchArgs {
  std::string config_path;
  std::string out_prefix = "dcovica_benchmark";
  int threads = 0;
};

BenchmarkConfig parse_benchmark_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_argument_error("cannot open benchmark config: " + path);
  BenchmarkConfig cfg;
  cfg.methods.clear();
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) continue;
    if (key == "methods") {
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (!item.empty()) cfg.methods.push_back(item);
      }
    } else if (key == "d") {
      cfg.d = std::stoll(value);
    } else if (key == "n") {
      cfg.n = std::stoll(value);
    } else if (key == "n_sims") {
      cfg.n_sims = std::stoll(value);
    } else if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "starts") {
      cfg.n_starts = std::stoll(value);
    } else if (key == "bandwidth_scale") {
      cfg.bandwidth_scale = std::stod(value);
    } else if (key == "cond_lo") {
      cfg.cond_lo = std::stod(value);
    } else if (key == "cond_hi") {
      cfg.cond_hi = std::stod(value);
    } else {
      throw invalid_argument_error("unknown benchmark config key: " + key);
    }
  }
  return cfg;
}

int run_benchmark_cmd(const BenchArgs& args, const std::string& command) {
  BenchmarkConfig cfg;
  try {
    cfg = parse_benchmark_config(args.config_path);
    cfg.threads = args.threads;
    if (cfg.methods.empty()) throw invalid_argument_error("empty methods list");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }

  auto [records, summaries] = run_benchmark(cfg);

  const std::string records_path = args.out_prefix + "_records.csv";
  const std::string summary_path = args.out_prefix + "_summary.csv";
  {
    std::ofstream out(records_path);
    out << "method,d,n,sim,seed,distributions,error,converged,wall_time_s\n";
    for (const auto& r : records) {
      std::string dist;
      for (std::size_t i = 0; i < r.distributions.size(); ++i) {
        if (i) dist += ';';
        dist += r.distributions[i];
      }
      out << r.method << ',' << r.d << ',' << r.n << ',' << r.sim << ',' << r.seed << ',' << dist
          << ',' << format_double(r.error) << ',' << (r.ok ? 1 : 0) << ','
          << format_double(r.wall_time_s) << '\n';
    }
  }
  {
    std::ofstream out(summary_path);
    out << "method,d,n,n_sims,n_failed,mean_error,std_error,mean_time_s\n";
    for (const auto& s : summaries)
      out << s.method << ',' << s.d << ',' << s.n << ',' << s.n_sims << ',' << s.n_failed << ','
          << format_double(s.mean_error) << ',' << format_double(s.std_error) << ','
          << format_double(s.mean_time_s) << '\n';
  }
  json config;
  config["config_file"] = args.config_path;
  config["d"] = cfg.d;
  config["n"] = cfg.n;
  config["n_sims"] = cfg.n_sims;
  config["methods"] = cfg.methods;
  config["catalog_version"] = kSourceCatalogVersion;
  write_json(args.out_prefix + "_manifest.json",
             json{{"manifest", manifest(command, args.config_path, cfg.seed, args.threads, config,
                                        {records_path, summary_path})}});

  std::cout << "benchmark written to " << records_path << " and " << summary_path << "\n";
  for (const auto& s : summaries)
    std::cout << "  " << s.method << ": mean D " << format_double(s.mean_error) << " (se "
              << format_double(s.std_error) << "), mean time " << format_double(s.mean_time_s)
              << " s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::string command_line;
  for (int i = 0; i < argc; ++i) {
    if (i) command_line += ' ';
    command_line += argv[i];
  }

  CLI::App app{"Independent component analysis via distance covariance"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate independent components from a CSV file");
  fit_cmd->add_option("input", fit_args.input, "input CSV (rows = observations)")->required();
  fit_cmd->add_option("--estimator", fit_args.estimator, "dcov | pitdcov")
      ->check(CLI::IsMember({"dcov", "pitdcov"}))
      ->capture_default_str();
  fit_cmd->add_option("--mode", fit_args.mode, "joint | sequential")
      ->check(CLI::IsMember({"joint", "sequential"}))
      ->capture_default_str();
  fit_cmd->add_option("--starts", fit_args.starts, "Latin hypercube starting points")
      ->capture_default_str();
  fit_cmd->add_option("--bandwidth-scale", fit_args.bandwidth_scale,
                      "multiplier on the Silverman bandwidth")
      ->capture_default_str();
  fit_cmd->add_option("--max-iters", fit_args.max_iters, "optimizer iteration cap (0 = auto)");
  fit_cmd->add_option("--f-tol", fit_args.f_tol, "optimizer objective tolerance")
      ->capture_default_str();
  fit_cmd->add_option("--seed", fit_args.seed, "RNG seed")->capture_default_str();
  fit_cmd->add_flag("--standardize", fit_args.standardize,
                    "divide columns by their sample standard deviation");
  fit_cmd->add_option("--threads", fit_args.threads, "worker cap (0 = auto / DCOVICA_THREADS)");
  fit_cmd->add_option("-o,--out-prefix", fit_args.out_prefix, "output prefix")
      ->capture_default_str();

  TestArgs test_args;
  auto* test_cmd = app.add_subcommand("test", "Independence and serial-dependence tests");
  test_cmd->add_option("input", test_args.input, "input CSV (ignored for --kind existence)");
  test_cmd->add_option("--kind", test_args.kind, "mutual | serial | existence")
      ->check(CLI::IsMember({"mutual", "serial", "existence"}))
      ->capture_default_str();
  test_cmd->add_option("--n-perm", test_args.n_perm, "permutations / resamples")
      ->capture_default_str();
  test_cmd->add_option("--lags", test_args.lags, "lag count for --kind serial")
      ->capture_default_str();
  test_cmd->add_option("--fit", test_args.fit_json, "fit.json from a prior fit (existence)");
  test_cmd->add_option("--alpha", test_args.alpha, "level for the confidence radius")
      ->capture_default_str();
  test_cmd->add_option("--seed", test_args.seed, "RNG seed")->capture_default_str();
  test_cmd->add_flag("--no-signed-perm", test_args.no_signed_perm,
                     "disable the random signed permutation in resampling");
  test_cmd->add_option("--threads", test_args.threads, "worker cap");
  test_cmd->add_option("-o,--out", test_args.out_path, "output path")->capture_default_str();

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("benchmark", "Simulation benchmark from a config file");
  bench_cmd->add_option("config", bench_args.config_path, "key = value config file")->required();
  bench_cmd->add_option("--threads", bench_args.threads, "worker cap");
  bench_cmd->add_option("-o,--out-prefix", bench_args.out_prefix, "output prefix")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadInput;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args, command_line);
    if (test_cmd->parsed()) {
      if ((test_args.kind == "mutual" || test_args.kind == "serial") && test_args.input.empty()) {
        std::cerr << "error: test --kind " << test_args.kind << " requires an input CSV\n";
        return kExitBadInput;
      }
      return run_test(test_args, command_line);
    }
    if (bench_cmd->parsed()) return run_benchmark_cmd(bench_args, command_line);
  } catch (const degenerate_data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const singular_covariance_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const csv_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const invalid_argument_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

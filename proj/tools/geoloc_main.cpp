// geoloc: train, apply and evaluate n-gram mixture location models.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoloc/errors.hpp"
#include "geoloc/harness.hpp"
#include "geoloc/metrics.hpp"
#include "geoloc/model.hpp"
#include "geoloc/parallel.hpp"
#include "geoloc/random.hpp"
#include "geoloc/synthgen.hpp"
#include "geoloc/tokenize.hpp"

namespace fs = std::filesystem;
using namespace geoloc;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumerical = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_numbers(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

TimePoint parse_date_arg(const std::string& s) {
  auto t = parse_date(s);
  if (!t) throw UsageError("bad date: '" + s + "'");
  return *t;
}

std::vector<RawRecord> read_globs(const std::vector<std::string>& globs, bool skip_bad) {
  ReadStats stats;
  auto records = read_corpus(expand_globs(globs), ReadOptions{skip_bad}, &stats);
  if (stats.skipped) std::cerr << "skipped " << stats.skipped << " malformed lines\n";
  return records;
}

// Writes to the named file, or stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw DataError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  bool is_stdout() const { return !file_.is_open(); }

 private:
  std::ofstream file_;
};

struct TrainArgs {
  std::vector<std::string> corpus;
  std::string from;
  double days = 1.0;
  std::string fields = "lo,tz,tx,ln";
  std::string algo = "err-sae";
  double alpha = 4.0;
  double lambda = 1.0;
  std::size_t min_instances = 3;
  int max_components = 20;
  std::uint64_t seed = 0;
  std::size_t threads = default_thread_count();
  bool skip_bad = false;
  std::string out;
};

TrainConfig train_config(const TrainArgs& a) {
  TrainConfig c;
  auto spec = parse_algorithm(a.algo);
  if (!spec) throw UsageError("unknown algorithm: " + a.algo);
  c.algorithm = spec->algorithm;
  if (spec->property) c.qpr_property = *spec->property;
  try {
    c.fields = parse_field_list(a.fields);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (c.fields.empty()) throw UsageError("no fields selected");
  if (a.max_components < 1) throw UsageError("--max-components must be at least 1");
  c.alpha = a.alpha;
  c.lambda = a.lambda;
  c.min_instances = a.min_instances;
  c.max_components = a.max_components;
  c.seed = a.seed;
  c.threads = std::max<std::size_t>(1, a.threads);
  return c;
}

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = train_config(a);
  const auto records = read_globs(a.corpus, a.skip_bad);
  if (records.empty()) throw DataError("corpus is empty");
  Interval interval;
  if (!a.from.empty()) {
    interval.begin = parse_date_arg(a.from);
    interval.end = interval.begin + days_to_seconds(a.days);
  } else {
    auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                        [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    interval = {lo->timestamp, hi->timestamp + std::chrono::seconds(1)};
  }
  const auto training = select_training(records, interval);
  if (training.empty()) throw DataError("no geotagged records in the training interval");
  const LocationModel model = train(std::span<const RawRecord>(training), cfg, interval);
  save_model(model, a.out);
  std::cerr << cfg.display_name() << ": " << model.entries().size() << " n-grams from " << training.size()
            << " messages -> " << a.out << '\n';
  return 0;
}

struct LocateArgs {
  std::string model;
  std::string input;
  std::string out;
  double cover = 0.95;
  std::string grid_dir;
  double grid_step = 0.5;
  bool skip_bad = false;
};

void dump_grid(const fs::path& path, const Gmm2D& g, double step) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "lon,lat,density\n";
  char buf[96];
  for (double lat = -90.0 + step / 2; lat < 90.0; lat += step)
    for (double lon = -180.0 + step / 2; lon < 180.0; lon += step) {
      std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.6g\n", lon, lat, g.density(Vector2(lon, lat)));
      f << buf;
    }
}

int run_locate(const LocateArgs& a) {
  if (!(a.cover > 0.0 && a.cover <= 1.0)) throw UsageError("--cover must lie in (0, 1]");
  if (!(a.grid_step > 0.0)) throw UsageError("--grid-step must be positive");
  const LocationModel model = load_model(a.model);
  const auto records = read_globs({a.input}, a.skip_bad);
  if (!a.grid_dir.empty()) fs::create_directories(a.grid_dir);
  Output out(a.out);
  for (const auto& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    const auto md = locate(model, tokenize_message(r, model.config().fields));
    j["located"] = md.has_value();
    if (md) {
      j["lon"] = md->point_estimate.lon;
      j["lat"] = md->point_estimate.lat;
      auto grams = nlohmann::json::array();
      double acc = 0.0;
      for (const auto& c : md->contributions) {
        if (acc >= a.cover) break;
        grams.push_back({{"ngram", to_string(c.ngram)}, {"share", c.share}});
        acc += c.share;
      }
      j["ngrams"] = grams;
      j["components"] = md->gmm.size();
      if (!a.grid_dir.empty()) {
        const fs::path p = fs::path(a.grid_dir) / ("msg-" + std::to_string(fnv1a64(r.id)) + ".csv");
        dump_grid(p, md->gmm, a.grid_step);
        j["grid"] = p.string();
      }
    }
    out.stream() << j.dump() << '\n';
  }
  return 0;
}

struct EvaluateArgs {
  std::string model;
  std::string test;
  std::string coverages = "0.5,0.9";
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = default_thread_count();
  bool no_runtime = false;
  bool skip_bad = false;
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  EvalOptions opts;
  opts.coverages = parse_numbers(a.coverages);
  for (double b : opts.coverages)
    if (!(b > 0.0 && b < 1.0)) throw UsageError("coverages must lie in (0, 1)");
  if (a.samples == 0) throw UsageError("--samples must be positive");
  opts.samples = a.samples;
  const auto t0 = std::chrono::steady_clock::now();
  const LocationModel model = load_model(a.model);
  std::vector<RawRecord> test;
  for (auto& r : read_globs({a.test}, a.skip_bad))
    if (r.origin) test.push_back(std::move(r));
  if (test.empty()) throw DataError("no geotagged test records");

  std::vector<std::optional<EstimateEvaluation>> evals(test.size());
  parallel_for(test.size(), std::max<std::size_t>(1, a.threads), [&](std::size_t i) {
    auto md = locate(model, tokenize_message(test[i], model.config().fields));
    if (md) evals[i] = evaluate_estimate(*md, *test[i].origin, opts, derive_seed(a.seed, "metric:" + test[i].id, 0));
  });
  std::vector<EstimateEvaluation> located;
  for (auto& e : evals)
    if (e) located.push_back(std::move(*e));

  ExperimentResult result;
  result.algorithm = model.config().display_name();
  result.scheduled = 1;
  WindowReport wr;
  wr.n_train = model.provenance().n_training;
  wr.n_model_ngrams = model.entries().size();
  wr.report = aggregate(located, test.size() - located.size(), opts.coverages);
  wr.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.windows.push_back(wr);
  auto& s = result.summary;
  s.n_windows = 1;
  s.mcae = wr.report.cae;
  s.msae = wr.report.sae;
  s.mpra = wr.report.pra;
  for (const auto& [b, v] : wr.report.oc) s.oc[b] = Summary{v, 0.0, v};
  s.success_rate = Summary{wr.report.success_rate, 0.0, wr.report.success_rate};
  s.runtime_s = wr.runtime_s;

  Output out(a.out);
  write_report_csv(out.stream(), result, !a.no_runtime);
  if (!out.is_stdout()) print_report_table(std::cout, result);
  return 0;
}

struct ExperimentArgs {
  std::string config;
  std::string out;
  bool no_runtime = false;
  std::optional<std::size_t> threads;
};

ExperimentConfig experiment_config(const ExperimentArgs& a) {
  ExperimentConfig cfg = load_experiment_config(a.config);
  if (a.threads) {
    cfg.threads = std::max<std::size_t>(1, *a.threads);
    cfg.train.threads = cfg.threads;
  }
  if (a.no_runtime) cfg.record_runtime = false;
  if (!a.out.empty()) cfg.report_path = a.out;
  // relative corpus globs resolve against the config file's directory
  const fs::path base = fs::path(a.config).parent_path();
  for (auto& g : cfg.corpus)
    if (fs::path(g).is_relative() && !base.empty()) g = (base / g).string();
  return cfg;
}

int run_experiment_cmd(const ExperimentArgs& a) {
  const ExperimentConfig cfg = experiment_config(a);
  const auto records = load_experiment_corpus(cfg);
  const auto result = run_experiment(records, cfg);
  Output out(cfg.report_path);
  write_report_csv(out.stream(), result, cfg.record_runtime);
  print_report_table(out.is_stdout() ? std::cerr : std::cout, result);
  return 0;
}

struct SweepArgs {
  ExperimentArgs experiment;
  std::string kind;
  std::string values;
};

int run_sweep(const SweepArgs& a) {
  const ExperimentConfig cfg = experiment_config(a.experiment);
  const auto records = load_experiment_corpus(cfg);
  if (a.kind == "fields") {
    const auto r = field_subset_sweep(records, cfg);
    if (cfg.report_path.empty() || cfg.report_path == "-") {
      write_field_sweep_csv(std::cout, r);
      std::cout << '\n';
      write_field_value_csv(std::cout, r);
    } else {
      Output subsets(cfg.report_path);
      write_field_sweep_csv(subsets.stream(), r);
      Output fields(fs::path(cfg.report_path).replace_extension(".fields.csv").string());
      write_field_value_csv(fields.stream(), r);
    }
    return 0;
  }
  if (a.values.empty()) throw UsageError("--values is required for this sweep");
  const auto values = parse_numbers(a.values);
  std::vector<SeriesPoint> series;
  if (a.kind == "gap")
    series = gap_sweep(records, cfg, values);
  else
    series = training_size_sweep(records, cfg, values);
  Output out(cfg.report_path);
  write_series_csv(out.stream(), a.kind == "gap" ? "gap_days" : "training_days", series, cfg.record_runtime);
  return 0;
}

struct SynthArgs {
  std::string config;
  std::size_t cities = 10;
  std::size_t messages = 1000;
  double sigma = 0.3;
  std::size_t vocab = 12;
  std::size_t shared = 20;
  double specificity = 0.8;
  std::string start = "2012-05-01";
  double days = 1.0;
  std::string id_prefix = "m";
  std::string user_prefix = "u";
  std::uint64_t seed = 0;
  std::string out;
};

int run_synth(const SynthArgs& a, bool seed_given) {
  SynthConfig cfg;
  if (!a.config.empty()) {
    cfg = load_synth_config(a.config);
    if (seed_given) cfg.seed = a.seed;
  } else {
    try {
      cfg.cities = world_cities(a.cities, a.sigma, a.vocab, a.specificity);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    cfg.shared_tokens = shared_vocabulary(a.shared);
    cfg.n_messages = a.messages;
    cfg.start = parse_date_arg(a.start);
    cfg.days = a.days;
    cfg.id_prefix = a.id_prefix;
    cfg.user_prefix = a.user_prefix;
    cfg.seed = a.seed;
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  Output out(a.out);
  generate_to(out.stream(), cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location estimation from message text with per-n-gram gaussian mixtures"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Fit a model on one training interval");
  train_cmd->add_option("--corpus", ta.corpus, "Corpus NDJSON files or globs")->required();
  train_cmd->add_option("--from", ta.from, "Interval start date (default: whole corpus)");
  train_cmd->add_option("--days", ta.days, "Interval length in days")->check(CLI::PositiveNumber);
  train_cmd->add_option("--fields", ta.fields, "Comma-separated fields from tx,ds,lo,ln,tz");
  train_cmd->add_option("--algo", ta.algo, "one, all-tweets, err-sae, qpr[-property], opt-id, opt-attr, opt-both");
  train_cmd->add_option("--alpha", ta.alpha, "Inverse-error exponent");
  train_cmd->add_option("--lambda", ta.lambda, "Regularization for optimized weights");
  train_cmd->add_option("--min-instances", ta.min_instances, "Minimum n-gram frequency");
  train_cmd->add_option("--max-components", ta.max_components, "Component cap (1: single gaussians)");
  train_cmd->add_option("--seed", ta.seed, "Master seed");
  train_cmd->add_option("--threads", ta.threads, "Worker threads");
  train_cmd->add_flag("--skip-bad-lines", ta.skip_bad, "Skip malformed corpus lines");
  train_cmd->add_option("--out", ta.out, "Model file")->required();

  LocateArgs la;
  auto* locate_cmd = app.add_subcommand("locate", "Estimate locations for messages");
  locate_cmd->add_option("--model", la.model, "Model file")->required();
  locate_cmd->add_option("--input", la.input, "Messages NDJSON")->required();
  locate_cmd->add_option("--out", la.out, "Estimates NDJSON (default stdout)");
  locate_cmd->add_option("--cover", la.cover, "List top n-grams until this weight share is covered");
  locate_cmd->add_option("--grid-dir", la.grid_dir, "Write a lon,lat,density grid per message here");
  locate_cmd->add_option("--grid-step", la.grid_step, "Grid spacing in degrees");
  locate_cmd->add_flag("--skip-bad-lines", la.skip_bad, "Skip malformed lines");

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model on geotagged messages");
  eval_cmd->add_option("--model", ea.model, "Model file")->required();
  eval_cmd->add_option("--test", ea.test, "Test NDJSON")->required();
  eval_cmd->add_option("--coverages", ea.coverages, "Prediction region coverages");
  eval_cmd->add_option("--samples", ea.samples, "Monte-Carlo sample size per estimate");
  eval_cmd->add_option("--seed", ea.seed, "Master seed");
  eval_cmd->add_option("--threads", ea.threads, "Worker threads");
  eval_cmd->add_flag("--no-runtime", ea.no_runtime, "Leave the runtime column empty");
  eval_cmd->add_flag("--skip-bad-lines", ea.skip_bad, "Skip malformed lines");
  eval_cmd->add_option("--out", ea.out, "Report CSV (default stdout)");

  ExperimentArgs xa;
  std::size_t x_threads = 0;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a windowed experiment from a TOML config");
  exp_cmd->add_option("--config", xa.config, "Experiment config")->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("--out", xa.out, "Report CSV (overrides the config)");
  auto* x_threads_opt = exp_cmd->add_option("--threads", x_threads, "Worker threads");
  exp_cmd->add_flag("--no-runtime", xa.no_runtime, "Leave the runtime column empty");

  SweepArgs sa;
  std::size_t s_threads = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Repeat an experiment over fields, gaps or training sizes");
  sweep_cmd->add_option("--kind", sa.kind, "fields, gap or train-size")
      ->required()
      ->check(CLI::IsMember({"fields", "gap", "train-size"}));
  sweep_cmd->add_option("--config", sa.experiment.config, "Experiment config")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--values", sa.values, "Comma-separated gap or training lengths in days");
  sweep_cmd->add_option("--out", sa.experiment.out, "Output CSV (overrides the config)");
  auto* s_threads_opt = sweep_cmd->add_option("--threads", s_threads, "Worker threads");
  sweep_cmd->add_flag("--no-runtime", sa.experiment.no_runtime, "Leave the runtime column empty");

  SynthArgs ya;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic geotagged corpus");
  synth_cmd->add_option("--config", ya.config, "JSON city config (overrides the shape options)");
  synth_cmd->add_option("--cities", ya.cities, "Number of built-in cities (1-20)");
  synth_cmd->add_option("--messages", ya.messages, "Number of records");
  synth_cmd->add_option("--sigma", ya.sigma, "Per-city spread in degrees");
  synth_cmd->add_option("--vocab", ya.vocab, "Private tokens per city");
  synth_cmd->add_option("--shared", ya.shared, "Shared tokens");
  synth_cmd->add_option("--specificity", ya.specificity, "Chance a drawn token stays city-specific");
  synth_cmd->add_option("--start", ya.start, "First day");
  synth_cmd->add_option("--days", ya.days, "Span in days");
  synth_cmd->add_option("--id-prefix", ya.id_prefix, "Record id prefix");
  synth_cmd->add_option("--user-prefix", ya.user_prefix, "User id prefix");
  auto* seed_opt = synth_cmd->add_option("--seed", ya.seed, "Seed");
  synth_cmd->add_option("--out", ya.out, "Output NDJSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*train_cmd) return run_train(ta);
    if (*locate_cmd) return run_locate(la);
    if (*eval_cmd) return run_evaluate(ea);
    if (*exp_cmd) {
      if (*x_threads_opt) xa.threads = x_threads;
      return run_experiment_cmd(xa);
    }
    if (*sweep_cmd) {
      if (*s_threads_opt) sa.experiment.threads = s_threads;
      return run_sweep(sa);
    }
    if (*synth_cmd) return run_synth(ya, static_cast<bool>(*seed_opt));
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

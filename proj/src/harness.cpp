#include "geoloc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>

#include "geoloc/errors.hpp"
#include "geoloc/parallel.hpp"
#include "geoloc/random.hpp"
#include "geoloc/tokenize.hpp"

namespace geoloc {

namespace {

const std::set<std::string> kKnownKeys = {
    "corpus",          "start",         "end",
    "seed",            "threads",       "record_runtime",
    "report",          "schedule.training_days",
    "schedule.test_days",             "schedule.gap_days",
    "schedule.stride_days",           "schedule.test_sample_size",
    "model.algorithm", "model.alpha",   "model.lambda",
    "model.fields",    "model.min_instances",
    "model.max_components",           "eval.samples",
    "eval.coverages",
};

std::size_t as_count(double v, const std::string& key) {
  if (!(v >= 0) || v != std::floor(v) || v > 1e15) throw DataError(key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

TimePoint floor_day(TimePoint t) { return std::chrono::floor<std::chrono::days>(t); }

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double pick(const std::map<double, Summary>& m, double key) {
  auto it = m.find(key);
  return it == m.end() ? std::numeric_limits<double>::quiet_NaN() : it->second.mean;
}

double pick(const std::map<double, double>& m, double key) {
  auto it = m.find(key);
  return it == m.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    schedule.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  if (train.fields.empty()) throw DataError("model.fields must not be empty");
  if (eval.samples == 0) throw DataError("eval.samples must be positive");
  for (double b : eval.coverages)
    if (!(b > 0.0 && b < 1.0)) throw DataError("eval.coverages must lie in (0, 1)");
  if (train.max_components < 1) throw DataError("model.max_components must be at least 1");
  if (start && end && *end <= *start) throw DataError("end must be after start");
}

ExperimentConfig experiment_config_from(const ConfigTable& t) {
  for (const auto& k : t.keys())
    if (!kKnownKeys.contains(k)) throw DataError("unknown config key: " + k);

  ExperimentConfig c;
  if (auto v = t.strings("corpus")) c.corpus = *v;
  auto date = [&](const std::string& key) -> std::optional<TimePoint> {
    auto s = t.string(key);
    if (!s) return std::nullopt;
    auto tp = parse_date(*s);
    if (!tp) throw DataError(key + ": bad date '" + *s + "'");
    return tp;
  };
  c.start = date("start");
  c.end = date("end");
  if (auto v = t.number("seed")) {
    c.schedule.seed = as_count(*v, "seed");
    c.train.seed = c.schedule.seed;
  }
  if (auto v = t.number("threads")) c.threads = std::max<std::size_t>(1, as_count(*v, "threads"));
  if (auto v = t.boolean("record_runtime")) c.record_runtime = *v;
  if (auto v = t.string("report")) c.report_path = *v;

  if (auto v = t.number("schedule.training_days")) c.schedule.training_days = *v;
  if (auto v = t.number("schedule.test_days")) c.schedule.test_days = *v;
  if (auto v = t.number("schedule.gap_days")) c.schedule.gap_days = *v;
  if (auto v = t.number("schedule.stride_days")) c.schedule.stride_days = *v;
  if (auto v = t.number("schedule.test_sample_size"))
    c.schedule.test_sample_size = as_count(*v, "schedule.test_sample_size");

  if (auto v = t.string("model.algorithm")) {
    auto spec = parse_algorithm(*v);
    if (!spec) throw DataError("unknown algorithm: " + *v);
    c.train.algorithm = spec->algorithm;
    if (spec->property) c.train.qpr_property = *spec->property;
  }
  if (auto v = t.number("model.alpha")) c.train.alpha = *v;
  if (auto v = t.number("model.lambda")) c.train.lambda = *v;
  if (auto v = t.strings("model.fields")) {
    std::string joined;
    for (const auto& f : *v) joined += (joined.empty() ? "" : ",") + f;
    try {
      c.train.fields = parse_field_list(joined);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("model.fields: ") + e.what());
    }
  }
  if (auto v = t.number("model.min_instances")) c.train.min_instances = as_count(*v, "model.min_instances");
  if (auto v = t.number("model.max_components"))
    c.train.max_components = static_cast<int>(as_count(*v, "model.max_components"));
  if (auto v = t.number("eval.samples")) c.eval.samples = as_count(*v, "eval.samples");
  if (auto v = t.numbers("eval.coverages")) c.eval.coverages = *v;

  c.train.threads = c.threads;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from(ConfigTable::load(path));
}

std::vector<RawRecord> load_experiment_corpus(const ExperimentConfig& config) {
  if (config.corpus.empty()) throw DataError("no corpus files configured");
  const auto paths = expand_globs(config.corpus);
  return read_corpus(paths);
}

ExperimentResult run_experiment(std::span<const RawRecord> records, const ExperimentConfig& config,
                                const WindowObserver& observer) {
  config.validate();
  if (records.empty()) throw DataError("corpus is empty");

  auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                      [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  const TimePoint start = config.start.value_or(floor_day(lo->timestamp));
  const TimePoint end = config.end.value_or(floor_day(hi->timestamp) + std::chrono::days(1));

  ExperimentResult result;
  TrainConfig tc = config.train;
  tc.threads = config.threads;
  result.algorithm = tc.display_name();

  const auto windows = schedule_windows(start, end, config.schedule);
  result.scheduled = windows.size();
  const std::uint64_t master = config.schedule.seed;

  for (const Window& w : windows) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto training = select_training(records, w.train);
    if (training.empty()) {
      ++result.skipped;
      continue;
    }
    tc.seed = derive_seed(master, "train", w.index);
    LocationModel model;
    try {
      model = train(std::span<const RawRecord>(training), tc, w.train);
    } catch (const DataError&) {
      ++result.skipped;
      continue;
    }
    const auto train_users = user_set(training);
    const auto test = select_test(records, w.test, train_users, config.schedule.test_sample_size,
                                  derive_seed(master, "test", w.index));
    if (test.empty()) {
      ++result.skipped;
      continue;
    }
    for (const auto& r : test)
      if (train_users.contains(r.user_id)) throw std::logic_error("test user also in training set");
    if (observer) observer(w, training, test);

    std::vector<std::optional<EstimateEvaluation>> evals(test.size());
    parallel_for(test.size(), config.threads, [&](std::size_t i) {
      const Message m = tokenize_message(test[i], tc.fields);
      auto md = locate(model, m);
      if (!md) return;
      evals[i] = evaluate_estimate(*md, *test[i].origin, config.eval,
                                   derive_seed(master, "metric:" + test[i].id, w.index));
    });
    std::vector<EstimateEvaluation> located;
    std::size_t missing = 0;
    for (auto& e : evals) {
      if (e)
        located.push_back(std::move(*e));
      else
        ++missing;
    }

    WindowReport wr;
    wr.window = w;
    wr.n_train = training.size();
    wr.n_model_ngrams = model.entries().size();
    wr.report = aggregate(located, missing, config.eval.coverages);
    wr.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.windows.push_back(std::move(wr));
  }

  GrandSummary& s = result.summary;
  s.n_windows = result.windows.size();
  auto over = [&](auto get) {
    std::vector<double> v;
    for (const auto& wr : result.windows) {
      double x = get(wr);
      if (!std::isnan(x)) v.push_back(x);
    }
    return v.empty() ? Summary{std::numeric_limits<double>::quiet_NaN(), 0.0,
                               std::numeric_limits<double>::quiet_NaN()}
                     : summarize(v);
  };
  auto has_located = [](const WindowReport& wr) { return wr.report.n_tests > wr.report.n_unlocated; };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.mcae = over([&](const WindowReport& wr) { return has_located(wr) ? wr.report.cae.mean : nan; });
  s.msae = over([&](const WindowReport& wr) { return has_located(wr) ? wr.report.sae.mean : nan; });
  for (double b : config.eval.coverages) {
    s.mpra[b] = over([&](const WindowReport& wr) { return has_located(wr) ? pick(wr.report.pra, b) : nan; });
    Summary oc = over([&](const WindowReport& wr) { return has_located(wr) ? pick(wr.report.oc, b) : nan; });
    s.oc[b] = oc;
  }
  s.success_rate = over([](const WindowReport& wr) { return wr.report.success_rate; });
  for (const auto& wr : result.windows) s.runtime_s += wr.runtime_s;
  return result;
}

void write_report_csv(std::ostream& out, const ExperimentResult& r, bool record_runtime) {
  out << "window,algorithm,mcae,mcae_std,msae,msae_std,mpra50,oc50,oc90,success_rate,n_tests,runtime_s\n";
  for (const auto& wr : r.windows) {
    const auto& a = wr.report;
    out << wr.window.index << ',' << r.algorithm << ',' << fmt(a.cae.mean) << ',' << fmt(a.cae.std) << ','
        << fmt(a.sae.mean) << ',' << fmt(a.sae.std) << ',' << fmt(pick(a.pra, 0.5)) << ','
        << fmt(pick(a.oc, 0.5)) << ',' << fmt(pick(a.oc, 0.9)) << ',' << fmt(a.success_rate) << ','
        << a.n_tests << ',' << (record_runtime ? fmt(wr.runtime_s) : std::string()) << '\n';
  }
  const auto& s = r.summary;
  std::size_t n_tests = 0;
  for (const auto& wr : r.windows) n_tests += wr.report.n_tests;
  auto summary_row = [&](const char* label, auto get) {
    out << label << ',' << r.algorithm << ',' << fmt(get(s.mcae)) << ',' << fmt(s.mcae.std) << ','
        << fmt(get(s.msae)) << ',' << fmt(s.msae.std) << ','
        << fmt(s.mpra.contains(0.5) ? get(s.mpra.at(0.5)) : std::numeric_limits<double>::quiet_NaN()) << ','
        << fmt(s.oc.contains(0.5) ? get(s.oc.at(0.5)) : std::numeric_limits<double>::quiet_NaN()) << ','
        << fmt(s.oc.contains(0.9) ? get(s.oc.at(0.9)) : std::numeric_limits<double>::quiet_NaN()) << ','
        << fmt(get(s.success_rate)) << ',' << n_tests << ','
        << (record_runtime ? fmt(s.runtime_s) : std::string()) << '\n';
  };
  summary_row("mean", [](const Summary& x) { return x.mean; });
  summary_row("median", [](const Summary& x) { return x.median; });
}

void print_report_table(std::ostream& out, const ExperimentResult& r) {
  const auto& s = r.summary;
  out << r.algorithm << ": " << s.n_windows << " of " << r.scheduled << " windows evaluated";
  if (r.skipped) out << " (" << r.skipped << " skipped)";
  out << '\n';
  auto row = [&](const char* name, const Summary& x, double scale, const char* unit) {
    out << "  " << std::left << std::setw(14) << name << std::right << std::fixed << std::setprecision(2)
        << std::setw(14) << x.mean * scale << " +/- " << std::setw(10) << x.std * scale << "  median "
        << std::setw(12) << x.median * scale << ' ' << unit << '\n';
  };
  row("MCAE", s.mcae, 1.0, "km");
  row("MSAE", s.msae, 1.0, "km");
  for (const auto& [b, x] : s.mpra) {
    const std::string name = "MPRA" + std::to_string(static_cast<int>(std::lround(b * 100)));
    row(name.c_str(), x, 1.0, "km^2");
  }
  for (const auto& [b, x] : s.oc) {
    const std::string name = "OC" + std::to_string(static_cast<int>(std::lround(b * 100)));
    row(name.c_str(), x, 100.0, "%");
  }
  row("success", s.success_rate, 100.0, "%");
  out.unsetf(std::ios::floatfield);
}

std::vector<FieldValue> field_values(std::span<const FieldSubsetRow> subsets, std::span<const Field> fields) {
  std::vector<FieldValue> out;
  auto find = [&](std::vector<Field> fs) -> const FieldSubsetRow* {
    std::sort(fs.begin(), fs.end());
    for (const auto& row : subsets) {
      auto r = row.fields;
      std::sort(r.begin(), r.end());
      if (r == fs) return &row;
    }
    return nullptr;
  };
  for (Field f : fields) {
    FieldValue v{f};
    const auto* alone = find({f});
    v.alone_mcae = alone ? alone->mcae : std::numeric_limits<double>::quiet_NaN();
    v.alone_success = alone ? alone->success_rate : std::numeric_limits<double>::quiet_NaN();
    std::vector<double> d_mcae, d_success;
    for (const auto& row : subsets) {
      if (std::find(row.fields.begin(), row.fields.end(), f) != row.fields.end()) continue;
      auto with = row.fields;
      with.push_back(f);
      const auto* w = find(with);
      if (!w) continue;
      if (!std::isnan(row.mcae) && !std::isnan(w->mcae)) d_mcae.push_back(row.mcae - w->mcae);
      d_success.push_back(w->success_rate - row.success_rate);
    }
    v.improvement_mcae = mean_of(d_mcae);
    v.improvement_success = mean_of(d_success);
    out.push_back(v);
  }
  return out;
}

FieldSweepResult field_subset_sweep(std::span<const RawRecord> records, const ExperimentConfig& base,
                                    std::span<const Field> fields) {
  if (records.empty()) throw DataError("corpus is empty");
  if (fields.empty() || fields.size() > 16) throw std::invalid_argument("field sweep needs 1 to 16 fields");
  FieldSweepResult out;
  const unsigned n_subsets = (1u << fields.size()) - 1;
  for (unsigned mask = 1; mask <= n_subsets; ++mask) {
    ExperimentConfig cfg = base;
    cfg.train.fields.clear();
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (mask & (1u << i)) cfg.train.fields.push_back(fields[i]);
    const auto r = run_experiment(records, cfg);
    out.subsets.push_back({cfg.train.fields, r.summary.mcae.mean, r.summary.success_rate.mean, r.summary.n_windows});
  }
  std::stable_sort(out.subsets.begin(), out.subsets.end(), [](const auto& a, const auto& b) {
    // NaN (no located message in any window) sorts last
    if (std::isnan(a.mcae) != std::isnan(b.mcae)) return std::isnan(b.mcae);
    return a.mcae < b.mcae;
  });
  out.fields = field_values(out.subsets, fields);
  return out;
}

void write_field_sweep_csv(std::ostream& out, const FieldSweepResult& r) {
  out << "fields,mcae,success_rate,n_windows\n";
  for (const auto& row : r.subsets)
    out << '"' << format_field_list(row.fields) << "\"," << fmt(row.mcae) << ',' << fmt(row.success_rate) << ','
        << row.n_windows << '\n';
}

void write_field_value_csv(std::ostream& out, const FieldSweepResult& r) {
  out << "field,alone_mcae,alone_success_rate,mcae_improvement,success_rate_improvement\n";
  for (const auto& v : r.fields)
    out << field_name(v.field) << ',' << fmt(v.alone_mcae) << ',' << fmt(v.alone_success) << ','
        << fmt(v.improvement_mcae) << ',' << fmt(v.improvement_success) << '\n';
}

namespace {

template <typename Setter>
std::vector<SeriesPoint> sweep(std::span<const RawRecord> records, const ExperimentConfig& config,
                               std::span<const double> values, Setter set) {
  if (records.empty()) throw DataError("corpus is empty");
  std::vector<SeriesPoint> out;
  for (double v : values) {
    ExperimentConfig cfg = config;
    set(cfg, v);
    const auto r = run_experiment(records, cfg);
    out.push_back({v, r.summary.mcae, r.summary.success_rate.mean, r.summary.runtime_s, r.summary.n_windows});
  }
  return out;
}

}  // namespace

std::vector<SeriesPoint> gap_sweep(std::span<const RawRecord> records, const ExperimentConfig& config,
                                   std::span<const double> gap_days) {
  return sweep(records, config, gap_days, [](ExperimentConfig& c, double v) { c.schedule.gap_days = v; });
}

std::vector<SeriesPoint> training_size_sweep(std::span<const RawRecord> records, const ExperimentConfig& config,
                                             std::span<const double> training_days) {
  return sweep(records, config, training_days,
               [](ExperimentConfig& c, double v) { c.schedule.training_days = v; });
}

void write_series_csv(std::ostream& out, std::string_view parameter, std::span<const SeriesPoint> series,
                      bool record_runtime) {
  out << parameter << ",mcae,mcae_std,mcae_median,success_rate,n_windows,runtime_s\n";
  for (const auto& p : series)
    out << fmt(p.value) << ',' << fmt(p.mcae.mean) << ',' << fmt(p.mcae.std) << ',' << fmt(p.mcae.median) << ','
        << fmt(p.success_rate) << ',' << p.n_windows << ',' << (record_runtime ? fmt(p.runtime_s) : std::string())
        << '\n';
}

}  // namespace geoloc

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoloc/config.hpp"
#include "geoloc/corpus.hpp"
#include "geoloc/metrics.hpp"
#include "geoloc/model.hpp"

namespace geoloc {

struct ExperimentConfig {
  std::vector<std::string> corpus;   // file globs
  std::optional<TimePoint> start;    // default: midnight UTC of the first record
  std::optional<TimePoint> end;      // default: midnight UTC after the last record
  Schedule schedule;                 // schedule.seed is the master seed
  TrainConfig train;
  EvalOptions eval;
  std::size_t threads = 1;
  bool record_runtime = true;
  std::string report_path;

  void validate() const;
};

/// Builds a config from the TOML keys documented in the README.
ExperimentConfig experiment_config_from(const ConfigTable& table);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct WindowReport {
  Window window;
  std::size_t n_train = 0;
  std::size_t n_model_ngrams = 0;
  AggregateReport report;
  double runtime_s = 0.0;
};

struct GrandSummary {
  std::size_t n_windows = 0;
  Summary mcae;
  Summary msae;
  std::map<double, Summary> mpra;
  std::map<double, Summary> oc;
  Summary success_rate;
  double runtime_s = 0.0;
};

struct ExperimentResult {
  std::string algorithm;
  std::size_t scheduled = 0;
  std::size_t skipped = 0;
  std::vector<WindowReport> windows;
  GrandSummary summary;
};

/// Called once per evaluated window with its training and test records.
using WindowObserver =
    std::function<void(const Window&, std::span<const RawRecord> train, std::span<const RawRecord> test)>;

/// Per window: select training, train, select test, locate, evaluate and
/// aggregate. Windows without training or test data are skipped and counted.
/// The grand summary is the unweighted mean over evaluated windows.
ExperimentResult run_experiment(std::span<const RawRecord> records, const ExperimentConfig& config,
                                const WindowObserver& observer = {});

/// Reads the config's corpus globs.
std::vector<RawRecord> load_experiment_corpus(const ExperimentConfig& config);

void write_report_csv(std::ostream& out, const ExperimentResult& result, bool record_runtime = true);
void print_report_table(std::ostream& out, const ExperimentResult& result);

struct FieldSubsetRow {
  std::vector<Field> fields;
  double mcae = 0.0;
  double success_rate = 0.0;
  std::size_t n_windows = 0;
};

struct FieldValue {
  Field field;
  double alone_mcae = 0.0;
  double alone_success = 0.0;
  double improvement_mcae = 0.0;     // positive means adding the field lowers MCAE
  double improvement_success = 0.0;  // percentage points as a fraction
};

struct FieldSweepResult {
  std::vector<FieldSubsetRow> subsets;  // sorted by ascending MCAE
  std::vector<FieldValue> fields;
};

/// Runs every non-empty subset of `fields` (31 for all five).
FieldSweepResult field_subset_sweep(std::span<const RawRecord> records, const ExperimentConfig& base,
                                    std::span<const Field> fields = kAllFields);

/// Mean change from adding each field to every non-empty subset lacking it.
std::vector<FieldValue> field_values(std::span<const FieldSubsetRow> subsets, std::span<const Field> fields);

void write_field_sweep_csv(std::ostream& out, const FieldSweepResult& result);
void write_field_value_csv(std::ostream& out, const FieldSweepResult& result);

struct SeriesPoint {
  double value = 0.0;
  Summary mcae;
  double success_rate = 0.0;
  double runtime_s = 0.0;
  std::size_t n_windows = 0;
};

std::vector<SeriesPoint> gap_sweep(std::span<const RawRecord> records, const ExperimentConfig& config,
                                   std::span<const double> gap_days);
std::vector<SeriesPoint> training_size_sweep(std::span<const RawRecord> records, const ExperimentConfig& config,
                                             std::span<const double> training_days);
void write_series_csv(std::ostream& out, std::string_view parameter, std::span<const SeriesPoint> series,
                      bool record_runtime = true);

}  // namespace geoloc

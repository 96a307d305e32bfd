#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glar/rng.hpp"

namespace glar {

enum class FreqKind { yearly, quarterly, monthly, weekly, daily, hourly };

// Time-series frequency with its canonical lag set and the default horizon
// used when a source dataset is trained at this frequency.
struct Frequency {
  FreqKind kind = FreqKind::monthly;

  const std::vector<int>& lags() const;
  int source_horizon() const;
  std::string token() const;  // Y,Q,M,W,D,H
  static Frequency from_token(const std::string& token);
};

struct TimeSeries {
  std::string item_id;
  std::string start;  // ISO-8601, kept verbatim
  Frequency freq;
  std::vector<double> values;

  int length() const { return static_cast<int>(values.size()); }
};

struct DatasetMetadata {
  Frequency freq;
  int prediction_length = 0;
};

DatasetMetadata load_metadata(const std::filesystem::path& path);

// Newline-delimited records: {"start": "...", "target": [...], "item_id": "..."?}.
// Malformed records are reported with their line number; missing ids are
// synthesized and duplicates deduplicated.
std::vector<TimeSeries> load_dataset(const std::filesystem::path& path, const DatasetMetadata& meta);

// Mean absolute value of the non-padded context entries; 1.0 when that mean is 0.
double compute_scale(std::span<const double> context, int pad_count = 0);

// A context/horizon split of one series. The context holds exactly t0 values,
// the first pad_count of which are synthetic zeros.
struct ForecastTask {
  std::string item_id;
  std::vector<double> context;
  int pad_count = 0;
  int horizon = 0;
  std::vector<double> horizon_targets;  // empty when forecasting past the series end
  double scale = 1.0;
  long long age_offset = 0;  // series index (0-based) of the first context slot

  int t0() const { return static_cast<int>(context.size()); }
};

// Uniformly random admissible split for training. The split point lands in
// [min_history, T - horizon]; shorter-than-context histories are left-padded.
ForecastTask sample_slice(const TimeSeries& series, int context_len, int horizon, int min_history, Rng& rng);

// Task whose context is the last context_len observations (padded if needed)
// and whose horizon extends past the series end.
ForecastTask make_prediction_task(const TimeSeries& series, int context_len, int horizon);

// Task splitting off the last `horizon` observations as targets; requires
// length > horizon.
ForecastTask make_eval_task(const TimeSeries& series, int context_len, int horizon);

struct TrainTestSplit {
  std::vector<TimeSeries> train;  // truncated by horizon
  std::vector<TimeSeries> test;   // originals with length > horizon
  int dropped = 0;
};

TrainTestSplit split_train_test(const std::vector<TimeSeries>& dataset, int horizon);

struct CovariateConfig {
  bool use_log_scale = true;
  bool normalize_age = false;
};

// One lag slot: either a concrete (scaled) number or a reference to a horizon
// step whose fill value is produced during the rollout.
struct CovariateSlot {
  double numeric = 0.0;
  int horizon_index = 0;  // 0 = numeric; otherwise 1-based index into the horizon
};

struct CovariatePlan {
  std::vector<CovariateSlot> lag_slots;
  double age = 0.0;
  double log_scale = 0.0;

  bool all_numeric() const {
    for (const auto& s : lag_slots)
      if (s.horizon_index != 0) return false;
    return true;
  }
};

// Slot plan for the covariate vector at window position t (1-based).
CovariatePlan plan_covariates(const ForecastTask& task, const std::vector<int>& lags, const CovariateConfig& cov,
                              int t);

// Concrete covariate vector [lags..., age, log_scale]; horizon slots are
// resolved from `horizon_fill_scaled` (scaled forecasts or scaled true
// observations covering t0+1..t-1 as far as produced).
std::vector<double> make_covariates(const ForecastTask& task, const std::vector<int>& lags,
                                    const CovariateConfig& cov, int t, std::span<const double> horizon_fill_scaled);

}  // namespace glar

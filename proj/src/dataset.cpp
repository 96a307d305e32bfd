#include "glar/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "glar/errors.hpp"
#include "json.hpp"

namespace glar {

namespace {

const std::vector<int> kYearlyLags = {1, 2, 3, 4, 5, 6, 7};
const std::vector<int> kQuarterlyLags = {1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 12, 13};
const std::vector<int> kMonthlyLags = {1, 2, 3, 4, 5, 6, 7, 11, 12, 13, 23, 24, 25, 35, 36, 37};
const std::vector<int> kWeeklyLags = {1, 2, 3, 4, 5, 6, 7, 8, 12, 51, 52, 53, 103, 104, 105, 155, 156, 157};
const std::vector<int> kDailyLags = {1,  2,  3,  4,  5,  6,  7,  8,   13,  14,  15,  20,  21,  22,  27,
                                     28, 29, 30, 31, 56, 84, 363, 364, 365, 727, 728, 729, 1091, 1092, 1093};
const std::vector<int> kHourlyLags = {1,   2,   3,   4,   5,   6,   7,   23,  24,  25,  47,  48,  49,
                                      71,  72,  73,  95,  96,  97,  119, 120, 121, 143, 144, 145, 167,
                                      168, 169, 335, 336, 337, 503, 504, 505, 671, 672, 673, 719, 720, 721};

}  // namespace

const std::vector<int>& Frequency::lags() const {
  switch (kind) {
    case FreqKind::yearly: return kYearlyLags;
    case FreqKind::quarterly: return kQuarterlyLags;
    case FreqKind::monthly: return kMonthlyLags;
    case FreqKind::weekly: return kWeeklyLags;
    case FreqKind::daily: return kDailyLags;
    case FreqKind::hourly: return kHourlyLags;
  }
  throw ConfigError("frequency: bad kind");
}

int Frequency::source_horizon() const {
  switch (kind) {
    case FreqKind::yearly: return 6;
    case FreqKind::quarterly: return 8;
    case FreqKind::monthly: return 18;
    case FreqKind::weekly: return 13;
    case FreqKind::daily: return 14;
    case FreqKind::hourly: return 48;
  }
  throw ConfigError("frequency: bad kind");
}

std::string Frequency::token() const {
  switch (kind) {
    case FreqKind::yearly: return "Y";
    case FreqKind::quarterly: return "Q";
    case FreqKind::monthly: return "M";
    case FreqKind::weekly: return "W";
    case FreqKind::daily: return "D";
    case FreqKind::hourly: return "H";
  }
  throw ConfigError("frequency: bad kind");
}

Frequency Frequency::from_token(const std::string& token) {
  if (token == "Y") return {FreqKind::yearly};
  if (token == "Q") return {FreqKind::quarterly};
  if (token == "M") return {FreqKind::monthly};
  if (token == "W") return {FreqKind::weekly};
  if (token == "D") return {FreqKind::daily};
  if (token == "H") return {FreqKind::hourly};
  throw DataError("unknown frequency token '" + token + "' (expected one of Y,Q,M,W,D,H)");
}

DatasetMetadata load_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metadata file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("metadata " + path.string() + ": " + e.what());
  }
  if (!j.contains("freq") || !j["freq"].is_string()) throw DataError("metadata: missing string field 'freq'");
  if (!j.contains("prediction_length") || !j["prediction_length"].is_number_integer()) {
    throw DataError("metadata: missing integer field 'prediction_length'");
  }
  DatasetMetadata meta;
  meta.freq = Frequency::from_token(j["freq"].get<std::string>());
  meta.prediction_length = j["prediction_length"].get<int>();
  if (meta.prediction_length < 1) throw DataError("metadata: prediction_length must be >= 1");
  return meta;
}

std::vector<TimeSeries> load_dataset(const std::filesystem::path& path, const DatasetMetadata& meta) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());

  std::vector<TimeSeries> out;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    std::ostringstream os;
    os << path.string() << ":" << line_no << ": " << msg;
    throw DataError(os.str());
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed record: ") + e.what());
    }
    if (!j.is_object() || !j.contains("start") || !j["start"].is_string()) fail("missing string field 'start'");
    if (!j.contains("target") || !j["target"].is_array()) fail("missing array field 'target'");

    TimeSeries ts;
    ts.start = j["start"].get<std::string>();
    ts.freq = meta.freq;
    ts.values.reserve(j["target"].size());
    for (const auto& v : j["target"]) {
      if (!v.is_number()) fail("non-numeric target entry");
      const double x = v.get<double>();
      if (!std::isfinite(x)) fail("non-finite target entry");
      ts.values.push_back(x);
    }
    if (ts.values.empty()) fail("empty target");

    if (j.contains("item_id")) {
      if (j["item_id"].is_string()) {
        ts.item_id = j["item_id"].get<std::string>();
      } else if (j["item_id"].is_number_integer()) {
        ts.item_id = std::to_string(j["item_id"].get<long long>());
      } else {
        fail("item_id must be a string or integer");
      }
    } else {
      ts.item_id = "series_" + std::to_string(out.size());
    }
    // deduplicate by suffixing
    std::string id = ts.item_id;
    int suffix = 1;
    while (seen_ids.count(id)) id = ts.item_id + "_" + std::to_string(suffix++);
    ts.item_id = id;
    seen_ids.insert(id);
    out.push_back(std::move(ts));
  }
  return out;
}

double compute_scale(std::span<const double> context, int pad_count) {
  if (context.empty()) throw DataError("compute_scale: empty context");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = static_cast<std::size_t>(pad_count); i < context.size(); ++i) {
    sum += std::abs(context[i]);
    ++n;
  }
  if (n == 0) return 1.0;
  const double mean = sum / static_cast<double>(n);
  return mean == 0.0 ? 1.0 : mean;
}

namespace {

// Builds the task for split point s0 (observations 1..s0 are history).
ForecastTask make_task_at(const TimeSeries& series, int s0, int context_len, int horizon, bool with_targets) {
  ForecastTask task;
  task.item_id = series.item_id;
  task.horizon = horizon;
  const int real_avail = std::min(s0, context_len);
  task.pad_count = context_len - real_avail;
  task.context.assign(static_cast<std::size_t>(context_len), 0.0);
  for (int i = 0; i < real_avail; ++i) {
    task.context[static_cast<std::size_t>(task.pad_count + i)] =
        series.values[static_cast<std::size_t>(s0 - real_avail + i)];
  }
  task.age_offset = static_cast<long long>(s0) - context_len;
  task.scale = compute_scale(task.context, task.pad_count);
  if (with_targets) {
    const int avail = std::min(horizon, series.length() - s0);
    task.horizon_targets.assign(series.values.begin() + s0, series.values.begin() + s0 + avail);
  }
  return task;
}

}  // namespace

ForecastTask sample_slice(const TimeSeries& series, int context_len, int horizon, int min_history, Rng& rng) {
  if (context_len < 1) throw ConfigError("sample_slice: context_len must be >= 1");
  if (min_history < 1 || min_history > context_len) {
    throw ConfigError("sample_slice: min_history must be in [1, context_len]");
  }
  const int hi = series.length() - horizon;
  if (hi < min_history) {
    std::ostringstream os;
    os << "sample_slice: series '" << series.item_id << "' admits no split (length " << series.length()
       << ", horizon " << horizon << ", min_history " << min_history << ")";
    throw DataError(os.str());
  }
  std::uniform_int_distribution<int> dist(min_history, hi);
  return make_task_at(series, dist(rng), context_len, horizon, /*with_targets=*/true);
}

ForecastTask make_prediction_task(const TimeSeries& series, int context_len, int horizon) {
  return make_task_at(series, series.length(), context_len, horizon, /*with_targets=*/false);
}

ForecastTask make_eval_task(const TimeSeries& series, int context_len, int horizon) {
  if (series.length() <= horizon) {
    throw DataError("make_eval_task: series '" + series.item_id + "' not longer than the horizon");
  }
  return make_task_at(series, series.length() - horizon, context_len, horizon, /*with_targets=*/true);
}

TrainTestSplit split_train_test(const std::vector<TimeSeries>& dataset, int horizon) {
  if (horizon < 1) throw ConfigError("split_train_test: horizon must be >= 1");
  TrainTestSplit split;
  for (const TimeSeries& ts : dataset) {
    if (ts.length() <= horizon) {
      std::cerr << "warning: series '" << ts.item_id << "' (length " << ts.length()
                << ") dropped by train/test split at horizon " << horizon << "\n";
      ++split.dropped;
      continue;
    }
    TimeSeries train = ts;
    train.values.resize(static_cast<std::size_t>(ts.length() - horizon));
    split.train.push_back(std::move(train));
    split.test.push_back(ts);
  }
  return split;
}

CovariatePlan plan_covariates(const ForecastTask& task, const std::vector<int>& lags, const CovariateConfig& cov,
                              int t) {
  const int t0 = task.t0();
  if (t < 1 || t > t0 + task.horizon) throw NumericError("plan_covariates: t out of range");
  CovariatePlan plan;
  plan.lag_slots.reserve(lags.size());
  for (int lag : lags) {
    const int src = t - lag;
    CovariateSlot slot;
    if (src >= 1 && src <= t0) {
      if (src > task.pad_count) slot.numeric = task.context[static_cast<std::size_t>(src - 1)] / task.scale;
      // padding slots stay 0
    } else if (src > t0) {
      slot.horizon_index = src - t0;
    }
    // src < 1: before the window, reads 0
    plan.lag_slots.push_back(slot);
  }
  double age = static_cast<double>(task.age_offset + (t - 1));
  if (cov.normalize_age) age /= static_cast<double>(t0);
  plan.age = age;
  plan.log_scale = cov.use_log_scale ? std::log(task.scale) : 0.0;
  return plan;
}

std::vector<double> make_covariates(const ForecastTask& task, const std::vector<int>& lags,
                                    const CovariateConfig& cov, int t,
                                    std::span<const double> horizon_fill_scaled) {
  const CovariatePlan plan = plan_covariates(task, lags, cov, t);
  std::vector<double> x;
  x.reserve(plan.lag_slots.size() + 2);
  for (const CovariateSlot& slot : plan.lag_slots) {
    if (slot.horizon_index == 0) {
      x.push_back(slot.numeric);
    } else {
      if (static_cast<std::size_t>(slot.horizon_index) > horizon_fill_scaled.size()) {
        throw NumericError("make_covariates: lag requires a horizon value not yet produced");
      }
      x.push_back(horizon_fill_scaled[static_cast<std::size_t>(slot.horizon_index - 1)]);
    }
  }
  x.push_back(plan.age);
  x.push_back(plan.log_scale);
  return x;
}

}  // namespace glar

#include "glar/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include "doctest.h"
#include "glar/errors.hpp"

using namespace glar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("glar_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  static inline int counter = 0;
};

fs::path write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
  return p;
}

TimeSeries make_series(const std::string& id, int length, FreqKind kind = FreqKind::monthly) {
  TimeSeries ts;
  ts.item_id = id;
  ts.start = "2001-01-01 00:00:00";
  ts.freq = {kind};
  for (int i = 0; i < length; ++i) ts.values.push_back(10.0 + i);
  return ts;
}

}  // namespace

TEST_CASE("frequency lag tables") {
  CHECK(Frequency{FreqKind::yearly}.lags() == std::vector<int>{1, 2, 3, 4, 5, 6, 7});
  CHECK(Frequency{FreqKind::monthly}.lags() ==
        std::vector<int>{1, 2, 3, 4, 5, 6, 7, 11, 12, 13, 23, 24, 25, 35, 36, 37});
  CHECK(Frequency{FreqKind::quarterly}.lags().size() == 12);
  CHECK(Frequency{FreqKind::weekly}.lags().size() == 18);
  CHECK(Frequency{FreqKind::daily}.lags().size() == 30);
  CHECK(Frequency{FreqKind::hourly}.lags().size() == 40);
  for (FreqKind k : {FreqKind::yearly, FreqKind::quarterly, FreqKind::monthly, FreqKind::weekly, FreqKind::daily,
                     FreqKind::hourly}) {
    const auto& lags = Frequency{k}.lags();
    for (std::size_t i = 0; i < lags.size(); ++i) {
      CHECK(lags[i] > 0);
      if (i > 0) CHECK(lags[i] > lags[i - 1]);
    }
  }
  CHECK(Frequency{FreqKind::yearly}.source_horizon() == 6);
  CHECK(Frequency{FreqKind::quarterly}.source_horizon() == 8);
  CHECK(Frequency{FreqKind::monthly}.source_horizon() == 18);
  CHECK(Frequency{FreqKind::hourly}.source_horizon() == 48);
  CHECK(Frequency::from_token("Q").kind == FreqKind::quarterly);
  CHECK_THROWS_AS(Frequency::from_token("X"), DataError);
}

TEST_CASE("load_dataset parses records") {
  TempDir dir;
  write_file(dir.path / "data.jsonl",
             "{\"start\":\"2015-01-01 00:00:00\",\"target\":[1,2,3]}\n"
             "{\"start\":\"2015-01-02 00:00:00\",\"target\":[4,5],\"item_id\":\"abc\"}\n");
  DatasetMetadata meta{Frequency{FreqKind::hourly}, 48};
  auto series = load_dataset(dir.path / "data.jsonl", meta);
  REQUIRE(series.size() == 2);
  CHECK(series[0].length() == 3);
  CHECK(series[0].item_id == "series_0");
  CHECK(series[1].item_id == "abc");
  CHECK(series[1].freq.kind == FreqKind::hourly);
}

TEST_CASE("load_dataset empty file gives empty list") {
  TempDir dir;
  write_file(dir.path / "empty.jsonl", "");
  auto series = load_dataset(dir.path / "empty.jsonl", {Frequency{FreqKind::monthly}, 18});
  CHECK(series.empty());
}

TEST_CASE("load_dataset reports the failing line") {
  TempDir dir;
  write_file(dir.path / "bad.jsonl",
             "{\"start\":\"2015-01-01\",\"target\":[1,2,3]}\n"
             "{\"start\":\"2015-01-01\",\"target\":[1,NaN,3]}\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir.path / "bad.jsonl", {Frequency{FreqKind::monthly}, 18}),
                       doctest::Contains(":2:"), DataError);
}

TEST_CASE("load_dataset rejects string targets and empty targets") {
  TempDir dir;
  write_file(dir.path / "bad.jsonl", "{\"start\":\"2015-01-01\",\"target\":[1,\"NaN\"]}\n");
  CHECK_THROWS_AS(load_dataset(dir.path / "bad.jsonl", {Frequency{FreqKind::monthly}, 18}), DataError);
  write_file(dir.path / "bad2.jsonl", "{\"start\":\"2015-01-01\",\"target\":[]}\n");
  CHECK_THROWS_AS(load_dataset(dir.path / "bad2.jsonl", {Frequency{FreqKind::monthly}, 18}), DataError);
}

TEST_CASE("load_dataset deduplicates ids") {
  TempDir dir;
  write_file(dir.path / "dup.jsonl",
             "{\"start\":\"2015-01-01\",\"target\":[1],\"item_id\":\"a\"}\n"
             "{\"start\":\"2015-01-01\",\"target\":[2],\"item_id\":\"a\"}\n");
  auto series = load_dataset(dir.path / "dup.jsonl", {Frequency{FreqKind::monthly}, 18});
  CHECK(series[0].item_id != series[1].item_id);
}

TEST_CASE("load_metadata") {
  TempDir dir;
  write_file(dir.path / "meta.json", "{\"freq\":\"M\",\"prediction_length\":18}");
  auto meta = load_metadata(dir.path / "meta.json");
  CHECK(meta.freq.kind == FreqKind::monthly);
  CHECK(meta.prediction_length == 18);
  write_file(dir.path / "meta_bad.json", "{\"freq\":\"15min\",\"prediction_length\":18}");
  CHECK_THROWS_AS(load_metadata(dir.path / "meta_bad.json"), DataError);
}

TEST_CASE("compute_scale") {
  std::vector<double> a = {2, -2, 4, 0};
  CHECK(compute_scale(a) == doctest::Approx(2.0));
  std::vector<double> zeros = {0, 0, 0};
  CHECK(compute_scale(zeros) == 1.0);
  std::vector<double> one = {5};
  CHECK(compute_scale(one) == doctest::Approx(5.0));
  std::vector<double> padded = {0, 0, 3, 5};
  CHECK(compute_scale(padded, 2) == doctest::Approx(4.0));
}

TEST_CASE("sample_slice split range and padding") {
  Rng rng(123);
  TimeSeries s100 = make_series("a", 100);

  SUBCASE("length 100: split uniform over [24, 82], pad only below 36") {
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
      ForecastTask task = sample_slice(s100, 36, 18, 24, rng);
      CHECK(task.t0() == 36);
      CHECK(task.horizon_targets.size() == 18);
      const int s0 = static_cast<int>(task.age_offset) + 36;
      CHECK(s0 >= 24);
      CHECK(s0 <= 82);
      CHECK(task.pad_count == std::max(0, 36 - s0));
      if (s0 >= 36) CHECK(task.pad_count == 0);
      seen.insert(s0);
    }
    CHECK(seen.size() > 50);  // actually spreads over the admissible range
  }

  SUBCASE("length 30 admits no split at min_history 24") {
    TimeSeries s30 = make_series("b", 30);
    CHECK_THROWS_AS(sample_slice(s30, 36, 18, 24, rng), DataError);
  }

  SUBCASE("length 50: splits in [24, 32]; split 30 pads 6") {
    TimeSeries s50 = make_series("c", 50);
    bool saw_30 = false;
    for (int i = 0; i < 500; ++i) {
      ForecastTask task = sample_slice(s50, 36, 18, 24, rng);
      const int s0 = static_cast<int>(task.age_offset) + 36;
      CHECK(s0 >= 24);
      CHECK(s0 <= 32);
      if (s0 == 30) {
        saw_30 = true;
        CHECK(task.pad_count == 6);
        // horizon targets are the true observations after the split
        CHECK(task.horizon_targets.front() == doctest::Approx(10.0 + 30));
      }
    }
    CHECK(saw_30);
  }
}

TEST_CASE("sampled slices always hold min_history real observations") {
  Rng rng(7);
  std::vector<TimeSeries> pool;
  for (int len : {43, 50, 77, 120, 31}) pool.push_back(make_series("s" + std::to_string(len), len));
  const int context_len = 36, horizon = 6, min_history = 24;
  for (int i = 0; i < 10000; ++i) {
    const TimeSeries& ts = pool[static_cast<std::size_t>(rng() % pool.size())];
    ForecastTask task = sample_slice(ts, context_len, horizon, min_history, rng);
    int real = 0;
    for (int k = task.pad_count; k < task.t0(); ++k) real += 1;
    CHECK(real >= min_history);
    CHECK(task.scale > 0.0);
  }
}

TEST_CASE("split_train_test") {
  std::vector<TimeSeries> ds = {make_series("a", 24), make_series("b", 18), make_series("c", 40)};
  TrainTestSplit split = split_train_test(ds, 18);
  REQUIRE(split.train.size() == 2);
  REQUIRE(split.test.size() == 2);
  CHECK(split.dropped == 1);
  CHECK(split.train[0].item_id == "a");
  CHECK(split.train[0].length() == 6);
  CHECK(split.test[0].length() == 24);
  // test targets are the removed tail
  for (int i = 0; i < 18; ++i) {
    CHECK(split.test[0].values[static_cast<std::size_t>(6 + i)] == doctest::Approx(10.0 + 6 + i));
  }
}

TEST_CASE("covariates: pure observations at the first horizon step") {
  TimeSeries ts = make_series("a", 60, FreqKind::yearly);
  ForecastTask task = make_eval_task(ts, 24, 6);
  const auto& lags = ts.freq.lags();
  auto x = make_covariates(task, lags, {}, task.t0() + 1, {});
  REQUIRE(x.size() == lags.size() + 2);
  // all lags <= t0: scaled true observations
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const int src = task.t0() + 1 - lags[static_cast<std::size_t>(i)];
    CHECK(x[i] == doctest::Approx(task.context[static_cast<std::size_t>(src - 1)] / task.scale));
  }
}

TEST_CASE("covariates: lag 1 at t0+2 holds the prior forecast") {
  TimeSeries ts = make_series("a", 80, FreqKind::monthly);
  ForecastTask task = make_eval_task(ts, 36, 18);
  std::vector<double> fills = {0.42};  // scaled forecast for t0+1
  auto x = make_covariates(task, ts.freq.lags(), {}, task.t0() + 2, fills);
  CHECK(x[0] == doctest::Approx(0.42));
  // requesting a fill that does not exist yet is an ordering violation
  CHECK_THROWS_AS(make_covariates(task, ts.freq.lags(), {}, task.t0() + 3, fills), NumericError);
}

TEST_CASE("covariates: padded prefix reads zero while age increments") {
  TimeSeries ts = make_series("tiny", 5, FreqKind::monthly);
  ForecastTask task = make_prediction_task(ts, 40, 6);
  CHECK(task.pad_count == 35);
  const auto& lags = ts.freq.lags();
  // t = 10 sits fully inside padding: every lag slot reads 0
  auto x10 = make_covariates(task, lags, {}, 10, {});
  for (std::size_t i = 0; i < lags.size(); ++i) CHECK(x10[i] == 0.0);
  // age strictly increments across consecutive positions, padding included
  auto x11 = make_covariates(task, lags, {}, 11, {});
  CHECK(x11[lags.size()] == doctest::Approx(x10[lags.size()] + 1.0));
  // age is anchored to the first real observation
  auto x36 = make_covariates(task, lags, {}, 36, {});
  CHECK(x36[lags.size()] == doctest::Approx(0.0));
  // lag pointing into padding reads 0 even from a real position
  const int t = 37;
  auto x37 = make_covariates(task, lags, {}, t, {});
  CHECK(x37[1] == 0.0);                                       // lag 2 -> position 35, padding
  CHECK(x37[0] == doctest::Approx(ts.values[0] / task.scale));  // lag 1 -> first real value
}

TEST_CASE("covariates: determinism and log-scale switch") {
  TimeSeries ts = make_series("a", 60, FreqKind::yearly);
  ForecastTask task = make_eval_task(ts, 24, 6);
  auto a = make_covariates(task, ts.freq.lags(), {}, 12, {});
  auto b = make_covariates(task, ts.freq.lags(), {}, 12, {});
  CHECK(a == b);
  CHECK(a.back() == doctest::Approx(std::log(task.scale)));
  CovariateConfig no_log{false, false};
  auto c = make_covariates(task, ts.freq.lags(), no_log, 12, {});
  CHECK(c.back() == 0.0);
  CovariateConfig norm_age{true, true};
  auto d = make_covariates(task, ts.freq.lags(), norm_age, 12, {});
  CHECK(d[ts.freq.lags().size()] == doctest::Approx(a[ts.freq.lags().size()] / task.t0()));
}

TEST_CASE("scaled lag slots are invariant under positive scaling without log-scale") {
  TimeSeries ts = make_series("a", 60, FreqKind::yearly);
  TimeSeries ts2 = ts;
  const double c = 4.0;  // power of two: scaling is exact in floating point
  for (double& v : ts2.values) v *= c;
  ForecastTask t1 = make_eval_task(ts, 24, 6);
  ForecastTask t2 = make_eval_task(ts2, 24, 6);
  CHECK(t2.scale == doctest::Approx(c * t1.scale).epsilon(1e-15));
  CovariateConfig no_log{false, false};
  for (int t : {5, 18, 25}) {
    auto x1 = make_covariates(t1, ts.freq.lags(), no_log, t, {});
    auto x2 = make_covariates(t2, ts.freq.lags(), no_log, t, {});
    for (std::size_t i = 0; i < x1.size(); ++i) CHECK(x1[i] == x2[i]);
  }
}

TEST_CASE("prediction task uses the last context_len observations") {
  TimeSeries ts = make_series("a", 100);
  ForecastTask task = make_prediction_task(ts, 36, 18);
  CHECK(task.pad_count == 0);
  CHECK(task.t0() == 36);
  CHECK(task.horizon_targets.empty());
  CHECK(task.context.back() == doctest::Approx(ts.values.back()));
  CHECK(task.age_offset == 64);
}

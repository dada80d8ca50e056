#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include "fixtures.hpp"
#include "hpomdp/errors.hpp"
#include "hpomdp/evaluation.hpp"
#include "hpomdp/simulation.hpp"
#include "oracles.hpp"

using namespace hpomdp;

namespace {

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

std::vector<PredictionRecord> records_of(const std::vector<double>& p, const std::vector<bool>& y) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back({"s", i + 1, p[i], y[i]});
  return out;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("toy1 second-step prediction") {
  const auto model = test::toy1();
  const std::vector<Trajectory> data = {{"s", {{0, true}, {0, false}}}};
  const auto run = next_step_predictions(model, data);
  REQUIRE(run.records.size() == 2);
  CHECK(std::abs(run.records[0].predicted - 0.48) < 1e-12);
  CHECK(std::abs(run.records[1].predicted - 0.7775) < 1e-12);
  CHECK(run.records[1].step == 2);
  CHECK_FALSE(run.records[1].actual);
  const auto later = next_step_predictions(model, data, {.include_first_step = false});
  REQUIRE(later.records.size() == 1);
  CHECK(later.records[0].step == 2);
}

TEST_CASE("degenerate model predicts exactly one") {
  auto model = test::toy1();
  model.components[0].initial = {0.0, 1.0};
  model.observation.guess = {0.0};
  model.observation.fluency = {1.0};
  const std::vector<Trajectory> data = {{"s", {{0, true}, {0, true}, {0, true}}}};
  for (const auto& r : next_step_predictions(model, data).records) CHECK(r.predicted == 1.0);
}

TEST_CASE("identical components predict like one") {
  auto single = test::toy1();
  auto doubled = single;
  doubled.components.push_back(doubled.components[0]);
  doubled.set_membership({{0.3, 0.7}});
  const std::vector<Trajectory> data = {{"s", {{0, true}, {0, false}, {0, true}, {0, true}}}};
  const auto a = next_step_predictions(single, data);
  const auto b = next_step_predictions(doubled, data);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(std::abs(a.records[i].predicted - b.records[i].predicted) < 1e-12);
  }
}

TEST_CASE("unknown questions are skipped with a warning") {
  const auto model = test::toy1();
  const QuestionCatalog dataset_catalog({{"q", 0}, {"stray", 0}}, 1);
  const std::vector<Trajectory> data = {{"s", {{0, true}, {1, false}, {0, true}}}};
  const auto run = next_step_predictions(model, dataset_catalog, data);
  CHECK(run.records.size() == 2);
  CHECK(run.skipped_unknown == 1);
  CHECK(run.warnings.size() == 1);
  CHECK(std::abs(run.records[1].predicted - 0.7775) < 1e-12);
}

TEST_CASE("hand-computed metrics") {
  const auto auc = compute_metrics(records_of({0.8, 0.6, 0.7, 0.2}, {true, true, false, false}));
  REQUIRE(auc.auc);
  CHECK(std::abs(*auc.auc - 0.75) < 1e-12);
  CHECK(auc.positives == 2);
  CHECK(auc.negatives == 2);

  const auto two = compute_metrics(records_of({0.7, 0.4}, {true, true}));
  CHECK(two.acc == doctest::Approx(0.5));
  CHECK(std::abs(two.mae - 0.45) < 1e-12);
  CHECK(std::abs(two.rmse - std::sqrt((0.09 + 0.36) / 2)) < 1e-12);
  CHECK_FALSE(two.auc);
  const auto root_sum = compute_metrics(records_of({0.7, 0.4}, {true, true}), RmseForm::root_sum_over_n);
  CHECK(std::abs(root_sum.rmse - std::sqrt(0.09 + 0.36) / 2) < 1e-12);

  const auto perfect = compute_metrics(records_of({1, 0, 1, 0}, {true, false, true, false}));
  CHECK(perfect.acc == 1.0);
  CHECK(*perfect.auc == 1.0);
  CHECK(perfect.mae == 0.0);
  CHECK(perfect.rmse == 0.0);

  const auto boundary = compute_metrics(records_of({0.5}, {true}));
  CHECK(boundary.acc == 1.0);
  CHECK_THROWS_AS(compute_metrics(std::vector<PredictionRecord>{}), ContractError);
}

TEST_CASE("rank AUC equals the pairwise count") {
  Rng rng = make_rng(61, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, trial < 150 ? 40 : 1000);
    std::vector<double> scores(n);
    std::vector<bool> labels(n);
    auto flags = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores force plenty of ties.
      scores[i] = static_cast<double>(uniform_index(rng, trial % 2 ? 5 : 1000)) / 4.0;
      labels[i] = flags[i] = uniform01(rng) < 0.4;
    }
    const auto ranked = rank_auc(scores, std::span<const bool>(flags.get(), n));
    const bool both = std::count(labels.begin(), labels.end(), true) > 0 &&
                      std::count(labels.begin(), labels.end(), false) > 0;
    REQUIRE(ranked.has_value() == both);
    if (both) CHECK(*ranked == test::pairwise_auc(scores, labels));
  }
}

TEST_CASE("metric properties") {
  Rng rng = make_rng(62, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 200);
    std::vector<PredictionRecord> recs;
    for (std::size_t i = 0; i < n; ++i) {
      recs.push_back({"s", i + 1, uniform01(rng), uniform01(rng) < 0.5});
    }
    const auto m = compute_metrics(recs);
    CHECK(m.rmse >= m.mae - 1e-15);
    CHECK(m.acc >= 0.0);
    CHECK(m.acc <= 1.0);
    auto shuffled = recs;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled.front(), shuffled[n / 2]);
    const auto s = compute_metrics(shuffled);
    CHECK(s.acc == m.acc);
    CHECK(s.auc == m.auc);
    CHECK(std::abs(s.mae - m.mae) < 1e-12);
    CHECK(std::abs(s.rmse - m.rmse) < 1e-12);
  }
}

TEST_CASE("fold assignment") {
  const auto gen = test::mixture_generator({0.6, 0.1});
  auto data = sample_dataset(gen, 12, 3, 1).dataset.trajectories;
  const auto loo = assign_folds(data, 12, 5);
  CHECK(std::set<std::size_t>(loo.begin(), loo.end()).size() == 12);

  const auto folds = assign_folds(data, 4, 5);
  std::vector<int> sizes(4, 0);
  for (auto f : folds) ++sizes[f];
  for (int s : sizes) CHECK(s == 3);

  auto reversed = data;
  std::reverse(reversed.begin(), reversed.end());
  const auto again = assign_folds(reversed, 4, 5);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(again[data.size() - 1 - i] == folds[i]);

  // A student's trajectories stay together.
  data.push_back(data.front());
  const auto grouped = assign_folds(data, 4, 5);
  CHECK(grouped.back() == grouped.front());

  CHECK_THROWS_AS(assign_folds(data, 1, 0), ContractError);
  CHECK_THROWS_AS(assign_folds(data, 13, 0), ContractError);
}

TEST_CASE("cross-validation runs every fold and tests every student once") {
  const auto gen = test::mixture_generator({0.7, 0.1});
  const auto data = sample_dataset(gen, 30, 6, 2).dataset;
  EmConfig em{.k = 2, .max_iterations = 20, .restarts = 1, .seed = 1};
  const auto cv = cross_validate(data, em, {.folds = 3, .seed = 4});
  REQUIRE(cv.folds.size() == 3);
  std::size_t tested = 0;
  for (const auto& f : cv.folds) {
    tested += f.test_size;
    CHECK(f.train_size + f.test_size == 30);
    CHECK(f.baseline.has_value());
    CHECK(f.hpomdp.sample_count == f.test_size * 6);
  }
  CHECK(tested == 30);
  CHECK(cv.mean_baseline.has_value());
  const auto threaded = cross_validate(data, em, {.folds = 3, .seed = 4, .threads = 2});
  CHECK(threaded.mean_hpomdp.mae == cv.mean_hpomdp.mae);
  const auto table = format_metric_table({{"H-POMDP", cv.mean_hpomdp}, {"POMDP", *cv.mean_baseline}});
  CHECK(table.find("AUC") != std::string::npos);
  CHECK(table.find("POMDP") != std::string::npos);
  CHECK_THROWS_AS(cross_validate(data, em, {.folds = 31}), ContractError);
}

}  // TEST_SUITE

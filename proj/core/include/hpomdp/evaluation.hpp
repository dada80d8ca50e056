#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hpomdp/domain.hpp"
#include "hpomdp/learning.hpp"

namespace hpomdp {

struct PredictionRecord {
  std::string student;
  std::size_t step = 0;  // 1-based position in the trajectory
  double predicted = 0.0;
  bool actual = false;
};

struct PredictionOptions {
  // The first response is predicted from the prior belief alone.
  bool include_first_step = true;
};

struct PredictionRun {
  std::vector<PredictionRecord> records;
  std::size_t skipped_unknown = 0;  // steps naming a question the model does not know
  std::vector<std::string> warnings;
};

// Folds each trajectory's belief step by step, predicting every response before seeing it.
// Action indices refer to `catalog`; questions are matched to the model's by id.
PredictionRun next_step_predictions(const HpomdpModel& model, const QuestionCatalog& catalog,
                                    std::span<const Trajectory> trajectories,
                                    const PredictionOptions& options = {});

// Same, with action indices already in the model's catalog.
PredictionRun next_step_predictions(const HpomdpModel& model,
                                    std::span<const Trajectory> trajectories,
                                    const PredictionOptions& options = {});

enum class RmseForm {
  standard,         // sqrt(Σ e² / n)
  root_sum_over_n,  // sqrt(Σ e²) / n
};

struct MetricReport {
  double acc = 0.0;
  std::optional<double> auc;  // empty when one class is missing
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t sample_count = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

inline constexpr double kAccuracyThreshold = 0.5;

MetricReport compute_metrics(std::span<const PredictionRecord> records,
                             RmseForm rmse_form = RmseForm::standard);

// Pairwise AUC from rank statistics: the fraction of (positive, negative) pairs ordered
// correctly, ties counted one half. Empty when either class is absent.
std::optional<double> rank_auc(std::span<const double> scores, std::span<const bool> labels);

// Fold of each trajectory, keyed on a hash of (seed, student id) so input order is irrelevant.
// All trajectories of one student land in the same fold.
std::vector<std::size_t> assign_folds(std::span<const Trajectory> trajectories,
                                      std::size_t folds, std::uint64_t seed);

struct CrossValidationConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  bool baseline = true;
  PredictionOptions prediction;
  RmseForm rmse_form = RmseForm::standard;
  std::size_t threads = 1;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  MetricReport hpomdp;
  std::optional<MetricReport> baseline;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  MetricReport mean_hpomdp;
  std::optional<MetricReport> mean_baseline;
};

// Fits the mixture (em) and, if requested, the single-pattern baseline on each training
// split and scores both on the held-out students.
CrossValidationResult cross_validate(const Dataset& dataset, const EmConfig& em,
                                     const CrossValidationConfig& config);

// Unweighted mean over reports; AUC averages the defined entries. Counts are summed.
MetricReport mean_report(std::span<const MetricReport> reports);

// Plain-text table: one row per (label, report) with ACC, AUC, MAE, RMSE, M and N columns.
std::string format_metric_table(
    const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace hpomdp

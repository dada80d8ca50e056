#include "hpomdp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "hpomdp/belief.hpp"
#include "hpomdp/errors.hpp"
#include "parallel.hpp"

namespace hpomdp {
namespace {

PredictionRun predict(const HpomdpModel& model, std::span<const Trajectory> trajectories,
                      const PredictionOptions& options,
                      const std::vector<std::optional<ActionIndex>>* mapping) {
  PredictionRun run;
  for (const auto& traj : trajectories) {
    Belief belief = init_belief(model);
    std::size_t skipped = 0;
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const Step& step = traj.steps[t];
      std::optional<ActionIndex> action;
      if (mapping) {
        if (step.action < mapping->size()) action = (*mapping)[step.action];
      } else if (step.action < model.questions.size()) {
        action = step.action;
      }
      if (!action) {
        ++skipped;
        continue;
      }
      if (t > 0 || options.include_first_step) {
        run.records.push_back(
            {traj.student, t + 1, predict_response(model, belief, *action), step.correct});
      }
      belief = update_belief(model, belief, *action, step.correct);
    }
    if (skipped > 0) {
      run.warnings.push_back("student " + traj.student + ": skipped " + std::to_string(skipped) +
                             " step(s) with questions unknown to the model");
      run.skipped_unknown += skipped;
    }
  }
  return run;
}

std::uint64_t fnv1a(std::uint64_t seed, std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char ch : text) mix(static_cast<unsigned char>(ch));
  return h;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

PredictionRun next_step_predictions(const HpomdpModel& model, const QuestionCatalog& catalog,
                                    std::span<const Trajectory> trajectories,
                                    const PredictionOptions& options) {
  std::vector<std::optional<ActionIndex>> mapping(catalog.size());
  for (ActionIndex a = 0; a < catalog.size(); ++a) mapping[a] = model.questions.find(catalog[a].id);
  return predict(model, trajectories, options, &mapping);
}

PredictionRun next_step_predictions(const HpomdpModel& model,
                                    std::span<const Trajectory> trajectories,
                                    const PredictionOptions& options) {
  return predict(model, trajectories, options, nullptr);
}

std::optional<double> rank_auc(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::uint64_t positives = 0;
  for (bool y : labels) positives += y ? 1 : 0;
  const std::uint64_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Doubled mid-ranks keep the rank sum integral.
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t doubled_mid = (i + 1) + j;
    for (std::size_t r = i; r < j; ++r) {
      if (labels[order[r]]) doubled_rank_sum += doubled_mid;
    }
    i = j;
  }
  const std::uint64_t doubled_u = doubled_rank_sum - positives * (positives + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(positives * negatives));
}

MetricReport compute_metrics(std::span<const PredictionRecord> records, RmseForm rmse_form) {
  if (records.empty()) throw ContractError("metrics need at least one prediction");
  MetricReport r;
  r.sample_count = records.size();
  double hits = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  std::vector<double> scores;
  std::vector<bool> labels;
  scores.reserve(records.size());
  labels.reserve(records.size());
  for (const auto& rec : records) {
    if (!(rec.predicted >= 0.0 && rec.predicted <= 1.0)) {
      throw ContractError("prediction outside [0, 1] for student " + rec.student);
    }
    const double y = rec.actual ? 1.0 : 0.0;
    const bool predicted_one = rec.predicted >= kAccuracyThreshold;
    if (predicted_one == rec.actual) hits += 1.0;
    abs_sum += std::abs(y - rec.predicted);
    sq_sum += (y - rec.predicted) * (y - rec.predicted);
    (rec.actual ? r.positives : r.negatives) += 1;
    scores.push_back(rec.predicted);
    labels.push_back(rec.actual);
  }
  const double n = static_cast<double>(records.size());
  r.acc = hits / n;
  r.mae = abs_sum / n;
  r.rmse = rmse_form == RmseForm::standard ? std::sqrt(sq_sum / n) : std::sqrt(sq_sum) / n;
  // std::vector<bool> has no contiguous storage to view.
  std::unique_ptr<bool[]> flags(new bool[labels.size()]);
  std::copy(labels.begin(), labels.end(), flags.get());
  r.auc = rank_auc(scores, std::span<const bool>(flags.get(), labels.size()));
  return r;
}

std::vector<std::size_t> assign_folds(std::span<const Trajectory> trajectories,
                                      std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ContractError("cross-validation needs at least 2 folds");
  std::map<std::string, std::uint64_t> students;
  for (const auto& t : trajectories) students.emplace(t.student, fnv1a(seed, t.student));
  if (students.size() < folds) {
    throw ContractError("cannot split " + std::to_string(students.size()) + " students into " +
                        std::to_string(folds) + " folds");
  }
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  keyed.reserve(students.size());
  for (const auto& [id, h] : students) keyed.emplace_back(h, id);
  std::sort(keyed.begin(), keyed.end());
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t rank = 0; rank < keyed.size(); ++rank) {
    fold_of.emplace(keyed[rank].second, rank % folds);
  }
  std::vector<std::size_t> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(fold_of.at(t.student));
  return out;
}

MetricReport mean_report(std::span<const MetricReport> reports) {
  if (reports.empty()) throw ContractError("nothing to average");
  MetricReport m;
  double auc_sum = 0.0;
  std::size_t auc_count = 0;
  for (const auto& r : reports) {
    m.acc += r.acc;
    m.mae += r.mae;
    m.rmse += r.rmse;
    if (r.auc) {
      auc_sum += *r.auc;
      ++auc_count;
    }
    m.sample_count += r.sample_count;
    m.positives += r.positives;
    m.negatives += r.negatives;
  }
  const double n = static_cast<double>(reports.size());
  m.acc /= n;
  m.mae /= n;
  m.rmse /= n;
  if (auc_count > 0) m.auc = auc_sum / static_cast<double>(auc_count);
  return m;
}

CrossValidationResult cross_validate(const Dataset& dataset, const EmConfig& em,
                                     const CrossValidationConfig& config) {
  validate_config(em);
  const auto fold_of = assign_folds(dataset.trajectories, config.folds, config.seed);

  EmConfig inner = em;
  if (config.threads > 1) inner.threads = 1;

  CrossValidationResult result;
  result.folds.resize(config.folds);
  detail::parallel_for(config.folds, config.threads, [&](std::size_t f) {
    Dataset train{dataset.graph, dataset.catalog, {}};
    std::vector<Trajectory> test;
    for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
      (fold_of[i] == f ? test : train.trajectories).push_back(dataset.trajectories[i]);
    }
    FoldResult& out = result.folds[f];
    out.fold = f;
    out.train_size = train.trajectories.size();
    out.test_size = test.size();

    const auto fitted = em_fit(train, inner);
    const auto run = next_step_predictions(fitted.model, test, config.prediction);
    out.hpomdp = compute_metrics(run.records, config.rmse_form);
    if (config.baseline) {
      const auto base = fit_baseline_pomdp(train, inner);
      const auto base_run = next_step_predictions(base.model, test, config.prediction);
      out.baseline = compute_metrics(base_run.records, config.rmse_form);
    }
  });

  std::vector<MetricReport> h, b;
  for (const auto& f : result.folds) {
    h.push_back(f.hpomdp);
    if (f.baseline) b.push_back(*f.baseline);
  }
  result.mean_hpomdp = mean_report(h);
  if (!b.empty()) result.mean_baseline = mean_report(b);
  return result;
}

std::string format_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t width = 5;
  for (const auto& [label, _] : rows) width = std::max(width, label.size());
  std::ostringstream os;
  auto cell = [&os](const std::string& s, std::size_t w) { os << std::setw(static_cast<int>(w)) << s; };
  os << std::left << std::setw(static_cast<int>(width)) << "model" << std::right;
  for (const char* h : {"ACC", "AUC", "MAE", "RMSE"}) cell(h, 10);
  cell("M", 10);
  cell("N", 10);
  os << '\n';
  for (const auto& [label, r] : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << label << std::right;
    cell(fixed(r.acc, 4), 10);
    cell(r.auc ? fixed(*r.auc, 4) : "n/a", 10);
    cell(fixed(r.mae, 4), 10);
    cell(fixed(r.rmse, 4), 10);
    cell(std::to_string(r.positives), 10);
    cell(std::to_string(r.negatives), 10);
    os << '\n';
  }
  return os.str();
}

}  // namespace hpomdp

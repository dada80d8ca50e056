#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hpomdp/belief.hpp"
#include "hpomdp/errors.hpp"
#include "hpomdp/evaluation.hpp"
#include "hpomdp/io.hpp"
#include "hpomdp/learning.hpp"
#include "hpomdp/planning.hpp"
#include "hpomdp/simulation.hpp"

namespace {

using namespace hpomdp;

struct FitOptions {
  std::size_t k = 3;
  std::size_t restarts = 5;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 200;
  double threshold = 1e-4;
  double floor = 1e-6;
  std::string membership_rule = "derived";
  std::string initial_rule = "weighted";
  std::string mode = "filtered";
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--k", o.k, "number of cognitive patterns")->capture_default_str();
  cmd->add_option("--restarts", o.restarts, "independent EM initializations")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--max-iterations", o.max_iterations)->capture_default_str();
  cmd->add_option("--threshold", o.threshold, "convergence threshold on parameter change")
      ->capture_default_str();
  cmd->add_option("--floor", o.floor, "probability floor")->capture_default_str();
  cmd->add_option("--membership-rule", o.membership_rule, "derived | likelihood-only")
      ->check(CLI::IsMember({"derived", "likelihood-only"}))
      ->capture_default_str();
  cmd->add_option("--initial-rule", o.initial_rule, "weighted | unweighted")
      ->check(CLI::IsMember({"weighted", "unweighted"}))
      ->capture_default_str();
  cmd->add_option("--mode", o.mode, "state space: filtered | full")
      ->check(CLI::IsMember({"filtered", "full"}))
      ->capture_default_str();
}

EmConfig em_config(const FitOptions& o, std::size_t threads) {
  EmConfig c;
  c.k = o.k;
  c.restarts = o.restarts;
  c.seed = o.seed;
  c.max_iterations = o.max_iterations;
  c.convergence_threshold = o.threshold;
  c.floor_probability = o.floor;
  c.membership_rule = o.membership_rule == "likelihood-only" ? MembershipRule::likelihood_only
                                                     : MembershipRule::derived;
  c.initial_rule = o.initial_rule == "unweighted" ? InitialDistributionRule::unweighted
                                               : InitialDistributionRule::responsibility_weighted;
  c.state_mode = parse_state_mode(o.mode);
  c.threads = threads;
  return c;
}

struct PlanOptions {
  std::size_t horizon = 10;
  std::size_t depth = 3;
  std::string mode = "receding";
  std::string reduction = "per-concept";
  double discount = 1.0;
};

void add_plan_options(CLI::App* cmd, PlanOptions& o) {
  cmd->add_option("--horizon", o.horizon, "planning horizon (steps)")->capture_default_str();
  cmd->add_option("--depth", o.depth, "lookahead depth in receding mode")->capture_default_str();
  cmd->add_option("--mode", o.mode, "receding | exact")
      ->check(CLI::IsMember({"receding", "exact"}))
      ->capture_default_str();
  cmd->add_option("--actions", o.reduction, "per-concept | all")
      ->check(CLI::IsMember({"per-concept", "all"}))
      ->capture_default_str();
  cmd->add_option("--discount", o.discount)->capture_default_str();
}

PlannerConfig planner_config(const PlanOptions& o) {
  PlannerConfig c;
  c.horizon = o.horizon;
  c.mode = o.mode == "exact" ? PlannerMode::exact : PlannerMode::receding;
  c.receding_depth = std::min(o.depth, o.horizon);
  c.reduction = o.reduction == "all" ? ActionReduction::full_catalog : ActionReduction::per_concept;
  c.discount = o.discount;
  return c;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(output);
  if (!out) throw LoadError("cannot write " + output);
  out << text;
}

void print_belief(const HpomdpModel& model, const Belief& b, std::ostream& os) {
  os << "pattern belief:";
  for (double p : b.pattern) os << ' ' << fixed(p);
  os << "\nconcept mastery:";
  const auto marginal = state_marginal(b);
  for (ConceptIndex c = 0; c < model.graph.size(); ++c) {
    double p = 0.0;
    for (StateIndex s = 0; s < model.space.size(); ++s) {
      if (model.space.mastered(s, c)) p += marginal[s];
    }
    os << ' ' << model.graph.name(c) << '=' << fixed(p);
  }
  os << '\n';
}

Belief fold_history(const HpomdpModel& model, const std::string& history) {
  Belief b = init_belief(model);
  std::stringstream ss(history);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw ContractError("history item '" + item + "' is not q:0|1");
    const std::string id = item.substr(0, colon);
    const std::string bit = item.substr(colon + 1);
    if (bit != "0" && bit != "1") throw ContractError("history item '" + item + "' is not q:0|1");
    const auto a = model.questions.find(id);
    if (!a) throw ContractError("history names unknown question '" + id + "'");
    b = update_belief(model, b, *a, bit == "1");
  }
  return b;
}

std::string ranked_table(const HpomdpModel& model, const std::vector<RankedAction>& ranked,
                         ActionIndex best) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "question" << std::setw(12) << "concept" << "value\n";
  for (const auto& r : ranked) {
    os << std::setw(16) << model.questions[r.action].id << std::setw(12)
       << model.graph.name(model.questions.concept_of(r.action)) << fixed(r.value, 6)
       << (r.action == best ? "  *" : "") << '\n';
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"H-POMDP cognitive modeling: ingest logs, fit patterns, predict, plan, simulate"};
  app.set_config("--config", "", "key=value file with default option values");
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "worker threads")->capture_default_str();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "answer log -> canonical dataset file");
  std::string log_path, graph_path, output;
  ColumnMapping mapping;
  std::vector<std::string> decode;
  ingest->add_option("--input", log_path, "comma or tab delimited log")->required();
  ingest->add_option("--graph", graph_path, "concept graph YAML")->required();
  ingest->add_option("--output", output, "dataset file (stdout if omitted)");
  ingest->add_option("--seq-key", mapping.sequence_key)->capture_default_str();
  ingest->add_option("--student-key", mapping.student_key)->capture_default_str();
  ingest->add_option("--question-key", mapping.question_key)->capture_default_str();
  ingest->add_option("--concept-key", mapping.concept_key)->capture_default_str();
  ingest->add_option("--correct-key", mapping.correctness_key)->capture_default_str();
  ingest->add_option("--decode", decode, "extra decoder entries RAW=0|1, e.g. I02=1");

  // fit
  auto* fit = app.add_subcommand("fit", "dataset -> model file");
  FitOptions fit_opts;
  std::string dataset_path;
  fit->add_option("--dataset", dataset_path)->required();
  fit->add_option("--graph", graph_path)->required();
  fit->add_option("--output", output, "model file (stdout if omitted)");
  add_fit_options(fit, fit_opts);

  // eval-predict
  auto* eval = app.add_subcommand("eval-predict", "next-response prediction metrics");
  std::string model_path;
  std::size_t folds = 0;
  bool exclude_first = false;
  bool no_baseline = false;
  std::string rmse_form = "standard";
  FitOptions cv_opts;
  eval->add_option("--dataset", dataset_path)->required();
  eval->add_option("--model", model_path, "score a fitted model");
  eval->add_option("--folds", folds, "cross-validate instead (needs --graph)");
  eval->add_option("--graph", graph_path);
  eval->add_option("--output", output);
  eval->add_flag("--exclude-first-step", exclude_first, "do not score the prior-only step");
  eval->add_flag("--no-baseline", no_baseline, "skip the single-pattern baseline in CV");
  eval->add_option("--rmse", rmse_form, "standard | root-sum")
      ->check(CLI::IsMember({"standard", "root-sum"}))
      ->capture_default_str();
  add_fit_options(eval, cv_opts);

  // plan
  auto* plan = app.add_subcommand("plan", "recommend the next question");
  PlanOptions plan_opts;
  std::string history;
  plan->add_option("--model", model_path)->required();
  plan->add_option("--history", history, "answers so far, e.g. q1:1,q2:0");
  add_plan_options(plan, plan_opts);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "tutor simulated students with a policy");
  std::string truth_path, policy_spec = "random", label;
  std::size_t students = 10000, sim_horizon = 10;
  std::uint64_t sim_seed = 0;
  PlanOptions sim_plan;
  simulate->add_option("--truth", truth_path, "ground-truth model")->required();
  simulate->add_option("--policy", policy_spec, "policy model file, or 'random'")
      ->capture_default_str();
  simulate->add_option("--label", label, "policy label in the cohort file");
  simulate->add_option("--students", students)->capture_default_str();
  simulate->add_option("--steps", sim_horizon, "questions per student")->capture_default_str();
  simulate->add_option("--seed", sim_seed)->capture_default_str();
  simulate->add_option("--output", output, "cohort file (stdout if omitted)");
  add_plan_options(simulate, sim_plan);

  // compare
  auto* compare = app.add_subcommand("compare", "two-sample t-test between two cohorts");
  std::string cohort_a, cohort_b;
  compare->add_option("cohort_a", cohort_a)->required();
  compare->add_option("cohort_b", cohort_b)->required();

  // tutor
  auto* tutor = app.add_subcommand("tutor", "interactive belief/plan stepping on stdin");
  PlanOptions tutor_plan;
  tutor->add_option("--model", model_path)->required();
  add_plan_options(tutor, tutor_plan);

  // sample
  auto* sample = app.add_subcommand("sample", "synthetic dataset from a model");
  std::size_t sequences = 100, length = 20;
  std::uint64_t sample_seed = 0;
  sample->add_option("--model", model_path)->required();
  sample->add_option("--sequences", sequences)->capture_default_str();
  sample->add_option("--length", length)->capture_default_str();
  sample->add_option("--seed", sample_seed)->capture_default_str();
  sample->add_option("--output", output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::contract);
  }

  try {
    if (*ingest) {
      for (const auto& entry : decode) {
        const auto eq = entry.rfind('=');
        if (eq == std::string::npos || (entry.substr(eq + 1) != "0" && entry.substr(eq + 1) != "1")) {
          throw ContractError("decoder entry '" + entry + "' is not RAW=0|1");
        }
        mapping.decoder[entry.substr(0, eq)] = entry.substr(eq + 1) == "1";
      }
      const auto graph = load_graph(graph_path);
      const auto result = ingest_logs(log_path, mapping, graph);
      std::ostringstream ds;
      write_dataset(result.dataset, ds);
      emit(ds.str(), output);
      std::cerr << format_ingestion_report(result.report);
    } else if (*fit) {
      const auto graph = load_graph(graph_path);
      const auto dataset = read_dataset(dataset_path, graph);
      const auto config = em_config(fit_opts, threads);
      const auto result = em_fit(dataset, config);
      emit(dump_model(result.model), output);
      std::cerr << "restart " << result.restart_index << ": " << result.iterations
                << " iterations, converged " << (result.converged ? "yes" : "no")
                << ", log-likelihood " << std::setprecision(10) << result.final_log_likelihood()
                << '\n';
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    } else if (*eval) {
      PredictionOptions prediction{!exclude_first};
      const RmseForm form = rmse_form == "root-sum" ? RmseForm::root_sum_over_n : RmseForm::standard;
      if (folds > 0) {
        if (graph_path.empty()) throw ContractError("--folds needs --graph");
        const auto dataset = read_dataset(dataset_path, load_graph(graph_path));
        CrossValidationConfig cv;
        cv.folds = folds;
        cv.seed = cv_opts.seed;
        cv.baseline = !no_baseline;
        cv.prediction = prediction;
        cv.rmse_form = form;
        cv.threads = threads;
        const auto result = cross_validate(dataset, em_config(cv_opts, 1), cv);
        std::vector<std::pair<std::string, MetricReport>> rows;
        for (const auto& f : result.folds) {
          rows.emplace_back("fold" + std::to_string(f.fold) + " H-POMDP", f.hpomdp);
          if (f.baseline) rows.emplace_back("fold" + std::to_string(f.fold) + " POMDP", *f.baseline);
        }
        rows.emplace_back("mean H-POMDP", result.mean_hpomdp);
        if (result.mean_baseline) rows.emplace_back("mean POMDP", *result.mean_baseline);
        emit(format_metric_table(rows), output);
      } else {
        if (model_path.empty()) throw ContractError("eval-predict needs --model or --folds");
        const auto model = load_model(model_path);
        const auto dataset = read_dataset(dataset_path, model.graph);
        const auto run =
            next_step_predictions(model, dataset.catalog, dataset.trajectories, prediction);
        for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
        emit(format_metric_table({{"model", compute_metrics(run.records, form)}}), output);
      }
    } else if (*plan) {
      const auto model = load_model(model_path);
      const auto belief = fold_history(model, history);
      const auto config = planner_config(plan_opts);
      const auto ranked = rank_actions(model, belief, config);
      const ActionIndex best = best_action(model, belief, config);
      print_belief(model, belief, std::cout);
      std::cout << ranked_table(model, ranked, best);
      std::cout << "recommended: " << model.questions[best].id << '\n';
    } else if (*simulate) {
      const auto truth = load_model(truth_path);
      std::unique_ptr<Policy> policy;
      if (policy_spec == "random") {
        policy = std::make_unique<RandomPolicy>(truth.questions, label.empty() ? "random" : label);
      } else {
        auto model = std::make_shared<const HpomdpModel>(load_model(policy_spec));
        PlannerConfig config = planner_config(sim_plan);
        config.horizon = std::min(config.horizon, sim_horizon);
        config.receding_depth = std::min(config.receding_depth, config.horizon);
        policy = std::make_unique<PlannerPolicy>(model, config, label.empty() ? "planner" : label);
      }
      const auto cohort =
          simulate_cohort(truth, *policy, sim_horizon, students, sim_seed, threads);
      emit(dump_cohort(cohort, truth.graph), output);
      const auto m = strategy_metrics(cohort, truth.graph);
      std::cerr << "pro_sum " << fixed(m.pro_sum) << "  VAR " << fixed(m.variance) << '\n';
    } else if (*compare) {
      const auto a = load_cohort(cohort_a);
      const auto b = load_cohort(cohort_b);
      if (!(a.graph == b.graph)) throw ContractError("cohorts were simulated on different graphs");
      const auto ma = strategy_metrics(a.result, a.graph);
      const auto mb = strategy_metrics(b.result, b.graph);
      const auto t = two_sample_t(a.result.mastered_counts, b.result.mastered_counts);
      std::cout << std::left << std::setw(16) << "cohort" << std::setw(10) << "students"
                << std::setw(12) << "pro_sum" << "VAR\n";
      for (const auto* c : {&a, &b}) {
        const auto& m = c == &a ? ma : mb;
        std::cout << std::setw(16) << c->result.policy_label << std::setw(10) << c->result.episodes
                  << std::setw(12) << fixed(m.pro_sum) << fixed(m.variance) << '\n';
      }
      std::cout << "t = " << (t.infinite ? (t.t > 0 ? "inf" : "-inf") : fixed(t.t))
                << "  df = " << t.degrees_of_freedom << "  p = " << std::setprecision(4)
                << t.p_value << (t.p_value < 0.05 ? "  (significant at 0.05)" : "") << '\n';
    } else if (*tutor) {
      const auto model = load_model(model_path);
      const auto config = planner_config(tutor_plan);
      Belief belief = init_belief(model);
      std::cout << "commands: next | <question> <0|1> | belief | reset | quit\n";
      std::string line;
      while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
        std::istringstream in(line);
        std::string word;
        if (!(in >> word)) continue;
        if (word == "quit" || word == "exit") break;
        try {
          if (word == "next") {
            std::cout << "ask " << model.questions[best_action(model, belief, config)].id << '\n';
          } else if (word == "belief") {
            print_belief(model, belief, std::cout);
          } else if (word == "reset") {
            belief = init_belief(model);
          } else {
            std::string bit;
            in >> bit;
            const auto a = model.questions.find(word);
            if (!a || (bit != "0" && bit != "1")) {
              std::cout << "expected: <question> <0|1>\n";
              continue;
            }
            std::cout << "predicted P(correct) = " << fixed(predict_response(model, belief, *a))
                      << '\n';
            belief = update_belief(model, belief, *a, bit == "1");
            print_belief(model, belief, std::cout);
          }
        } catch (const ImpossibleEvidenceError& e) {
          std::cout << "rejected: " << e.what() << '\n';
        }
      }
    } else if (*sample) {
      const auto model = load_model(model_path);
      const auto sampled = sample_dataset(model, sequences, length, sample_seed);
      std::ostringstream ds;
      write_dataset(sampled.dataset, ds);
      emit(ds.str(), output);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

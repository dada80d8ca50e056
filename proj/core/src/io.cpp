#include "hpomdp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <yaml-cpp/yaml.h>

#include "hpomdp/errors.hpp"

namespace hpomdp {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(trim(field));
  return out;
}

std::optional<double> parse_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw LoadError("failed writing " + path.string());
}

// ---- YAML helpers ----

[[noreturn]] void fail(const std::string& source, const std::string& where,
                       const std::string& what) {
  throw LoadError(source + ": " + (where.empty() ? "" : where + ": ") + what);
}

YAML::Node parse_yaml(const std::string& text, const std::string& source) {
  try {
    YAML::Node root = YAML::Load(text);
    if (!root.IsMap()) fail(source, "", "expected a mapping at the top level");
    return root;
  } catch (const YAML::Exception& e) {
    fail(source, "", std::string("malformed YAML: ") + e.what());
  }
}

YAML::Node require(const YAML::Node& node, const std::string& key, const std::string& source,
                   const std::string& where) {
  if (!node.IsMap()) fail(source, where, "expected a mapping");
  YAML::Node child = node[key];
  if (!child) fail(source, where.empty() ? key : where + "." + key, "missing");
  return child;
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& source, const std::string& where) {
  if (!node.IsScalar()) fail(source, where, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(source, where, "cannot read '" + node.Scalar() + "'");
  }
}

double probability(const YAML::Node& node, const std::string& source, const std::string& where) {
  const double p = scalar<double>(node, source, where);
  if (!(p >= 0.0 && p <= 1.0)) fail(source, where, "probability outside [0, 1]");
  return p;
}

std::vector<double> probability_list(const YAML::Node& node, std::size_t expected,
                                     const std::string& source, const std::string& where) {
  if (!node.IsSequence()) fail(source, where, "expected a list");
  if (node.size() != expected) {
    fail(source, where,
         "expected " + std::to_string(expected) + " entries, found " + std::to_string(node.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    out.push_back(probability(node[i], source, where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void check_version(const YAML::Node& root, const std::string& source) {
  const auto version = scalar<std::string>(require(root, "formatVersion", source, ""), source,
                                           "formatVersion");
  if (version != kFormatVersion) {
    fail(source, "formatVersion",
         "unsupported version '" + version + "' (this build reads version " + kFormatVersion + ")");
  }
}

void emit_graph(YAML::Emitter& out, const ConceptGraph& graph) {
  out << YAML::BeginMap;
  out << YAML::Key << "concepts" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& c : graph.concepts()) out << c;
  out << YAML::EndSeq;
  out << YAML::Key << "prerequisites" << YAML::Value << YAML::BeginSeq;
  for (const auto& [p, c] : graph.edges()) {
    out << YAML::Flow << YAML::BeginSeq << graph.name(p) << graph.name(c) << YAML::EndSeq;
  }
  out << YAML::EndSeq << YAML::EndMap;
}

ConceptGraph read_graph(const YAML::Node& node, const std::string& source,
                        const std::string& where) {
  const std::string prefix = where.empty() ? "" : where + ".";
  const YAML::Node concepts = require(node, "concepts", source, where);
  if (!concepts.IsSequence()) fail(source, prefix + "concepts", "expected a list");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    names.push_back(
        scalar<std::string>(concepts[i], source, prefix + "concepts[" + std::to_string(i) + "]"));
  }
  std::vector<ConceptGraph::Edge> edges;
  if (const YAML::Node pre = node["prerequisites"]) {
    if (!pre.IsSequence()) fail(source, prefix + "prerequisites", "expected a list");
    for (std::size_t i = 0; i < pre.size(); ++i) {
      const std::string at = prefix + "prerequisites[" + std::to_string(i) + "]";
      if (!pre[i].IsSequence() || pre[i].size() != 2) fail(source, at, "expected [parent, child]");
      edges.emplace_back(scalar<std::string>(pre[i][0], source, at),
                         scalar<std::string>(pre[i][1], source, at));
    }
  }
  try {
    return ConceptGraph(std::move(names), edges);
  } catch (const StructuralError& e) {
    fail(source, where.empty() ? "graph" : where, e.what());
  }
}

std::string quoted_key(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

// ---- ingestion ----

IngestionResult ingest_logs(const std::filesystem::path& path, const ColumnMapping& mapping,
                            const ConceptGraph& graph) {
  auto in = open_input(path);
  return ingest_logs(in, mapping, graph);
}

IngestionResult ingest_logs(std::istream& in, const ColumnMapping& mapping,
                            const ConceptGraph& graph) {
  const std::vector<std::string> keys = {mapping.sequence_key, mapping.student_key,
                                         mapping.question_key, mapping.concept_key,
                                         mapping.correctness_key};
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = i + 1; j < keys.size(); ++j) {
      if (keys[i] == keys[j]) throw ContractError("column '" + keys[i] + "' mapped twice");
    }
  }

  std::string header;
  if (!std::getline(in, header)) throw ContractError("log has no header row");
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const auto columns = split_fields(header, delim);
  std::vector<std::size_t> col(keys.size());
  std::string missing;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto it = std::find(columns.begin(), columns.end(), keys[k]);
    if (it == columns.end()) {
      missing += (missing.empty() ? "" : ", ") + keys[k];
    } else {
      col[k] = static_cast<std::size_t>(it - columns.begin());
    }
  }
  if (!missing.empty()) throw ContractError("log header lacks column(s): " + missing);
  const std::size_t needed = *std::max_element(col.begin(), col.end()) + 1;

  struct Row {
    double seq;
    std::string question;
    bool correct;
  };
  IngestionResult result{Dataset{graph, {}, {}}, {}};
  auto& report = result.report;
  std::map<std::string, std::vector<Row>> by_student;
  std::map<std::string, std::map<ConceptIndex, std::size_t>> question_concepts;

  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++report.rows;
    const auto f = split_fields(line, delim);
    if (f.size() < needed) {
      ++report.dropped_malformed;
      continue;
    }
    const auto concept_index = graph.find(f[col[3]]);
    if (!concept_index) {
      ++report.dropped_unknown_concept;
      continue;
    }
    const auto seq = parse_number(f[col[0]]);
    if (!seq) {
      ++report.dropped_bad_sequence;
      continue;
    }
    const auto decoded = mapping.decoder.find(f[col[4]]);
    if (decoded == mapping.decoder.end()) {
      ++report.dropped_bad_correctness;
      continue;
    }
    ++report.kept;
    ++question_concepts[f[col[2]]][*concept_index];
    by_student[f[col[1]]].push_back({*seq, f[col[2]], decoded->second});
  }

  std::vector<Question> questions;
  for (const auto& [id, counts] : question_concepts) {
    ConceptIndex best = counts.begin()->first;
    for (const auto& [c, n] : counts) {
      if (n > counts.at(best)) best = c;
    }
    if (counts.size() > 1) {
      report.warnings.push_back("question " + id + " appears under " +
                                std::to_string(counts.size()) + " concepts; using " +
                                graph.name(best));
    }
    questions.push_back({id, best});
  }
  result.dataset.catalog = QuestionCatalog(std::move(questions), graph.size());

  for (const auto& c : graph.concepts()) report.concept_coverage[c] = 0;
  for (auto& [student, rows] : by_student) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.seq, a.question, a.correct) < std::tie(b.seq, b.question, b.correct);
    });
    Trajectory traj{student, {}};
    for (const auto& r : rows) {
      const ActionIndex a = result.dataset.catalog.index_of(r.question);
      traj.steps.push_back({a, r.correct});
      ++report.concept_coverage[graph.name(result.dataset.catalog.concept_of(a))];
    }
    result.dataset.trajectories.push_back(std::move(traj));
  }
  report.students = result.dataset.trajectories.size();
  report.questions = result.dataset.catalog.size();
  return result;
}

std::string format_ingestion_report(const IngestionReport& r) {
  std::ostringstream os;
  os << "rows: " << r.rows << "\nkept: " << r.kept
     << "\ndropped (unknown concept): " << r.dropped_unknown_concept
     << "\ndropped (bad sequence key): " << r.dropped_bad_sequence
     << "\ndropped (bad correctness): " << r.dropped_bad_correctness
     << "\ndropped (malformed): " << r.dropped_malformed << "\nstudents: " << r.students
     << "\nquestions: " << r.questions << "\ncoverage:\n";
  for (const auto& [c, n] : r.concept_coverage) os << "  " << c << ": " << n << '\n';
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
  return os.str();
}

// ---- canonical dataset ----

void write_dataset(const Dataset& dataset, std::ostream& out) {
  std::vector<const Trajectory*> order;
  for (const auto& t : dataset.trajectories) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(),
                   [](const Trajectory* a, const Trajectory* b) { return a->student < b->student; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->student == order[i - 1]->student) {
      throw ContractError("student " + order[i]->student + " has more than one trajectory");
    }
  }
  out << "student\tstep\tquestion\tconcept\tcorrect\n";
  for (const Trajectory* t : order) {
    for (std::size_t s = 0; s < t->steps.size(); ++s) {
      const auto& q = dataset.catalog[t->steps[s].action];
      out << t->student << '\t' << s + 1 << '\t' << q.id << '\t'
          << dataset.graph.name(q.concept_index) << '\t' << (t->steps[s].correct ? 1 : 0) << '\n';
    }
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_dataset(dataset, out);
  if (!out) throw LoadError("failed writing " + path.string());
}

Dataset read_dataset(std::istream& in, const ConceptGraph& graph, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "student\tstep\tquestion\tconcept\tcorrect") {
    throw LoadError(source + ": expected header 'student step question concept correct'");
  }
  struct Row {
    std::string student;
    std::size_t step;
    std::string question;
    bool correct;
  };
  std::vector<Row> rows;
  std::map<std::string, ConceptIndex> question_concept;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string at = source + ":" + std::to_string(lineno) + ": ";
    const auto f = split_fields(line, '\t');
    if (f.size() != 5) throw LoadError(at + "expected 5 tab-separated fields");
    const auto step = parse_number(f[1]);
    if (!step || *step < 1 || *step != std::floor(*step)) throw LoadError(at + "bad step index");
    const auto c = graph.find(f[3]);
    if (!c) throw LoadError(at + "concept '" + f[3] + "' is not in the graph");
    if (f[4] != "0" && f[4] != "1") throw LoadError(at + "correct must be 0 or 1");
    const auto [it, inserted] = question_concept.emplace(f[2], *c);
    if (!inserted && it->second != *c) {
      throw LoadError(at + "question '" + f[2] + "' listed under two concepts");
    }
    rows.push_back({f[0], static_cast<std::size_t>(*step), f[2], f[4] == "1"});
  }
  std::vector<Question> questions;
  for (const auto& [id, c] : question_concept) questions.push_back({id, c});
  Dataset dataset{graph, QuestionCatalog(std::move(questions), graph.size()), {}};

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.student, a.step) < std::tie(b.student, b.step);
  });
  for (const auto& r : rows) {
    if (dataset.trajectories.empty() || dataset.trajectories.back().student != r.student) {
      dataset.trajectories.push_back({r.student, {}});
    }
    auto& traj = dataset.trajectories.back();
    if (r.step != traj.steps.size() + 1) {
      throw LoadError(source + ": student " + r.student + " has a missing or repeated step " +
                      std::to_string(r.step));
    }
    traj.steps.push_back({dataset.catalog.index_of(r.question), r.correct});
  }
  return dataset;
}

Dataset read_dataset(const std::filesystem::path& path, const ConceptGraph& graph) {
  auto in = open_input(path);
  return read_dataset(in, graph, path.string());
}

// ---- graph ----

ConceptGraph parse_graph(const std::string& text, const std::string& source) {
  return read_graph(parse_yaml(text, source), source, "");
}

ConceptGraph load_graph(const std::filesystem::path& path) {
  return parse_graph(read_file(path), path.string());
}

std::string dump_graph(const ConceptGraph& graph) {
  YAML::Emitter out;
  emit_graph(out, graph);
  return std::string(out.c_str()) + "\n";
}

void save_graph(const ConceptGraph& graph, const std::filesystem::path& path) {
  write_file(path, dump_graph(graph));
}

// ---- model ----

std::string dump_model(const HpomdpModel& model) {
  if (const auto v = validate_model(model); !v.empty()) {
    throw ContractError("refusing to save an invalid model: " + v.front().invariant + " at " +
                        v.front().location);
  }
  const auto& space = model.space;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "formatVersion" << YAML::Value << YAML::DoubleQuoted << kFormatVersion;
  out << YAML::Key << "graph" << YAML::Value;
  emit_graph(out, model.graph);
  out << YAML::Key << "stateMode" << YAML::Value << std::string(to_string(space.mode()));
  out << YAML::Key << "states" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& s : space.states()) out << YAML::DoubleQuoted << s.to_string();
  out << YAML::EndSeq;

  out << YAML::Key << "questions" << YAML::Value << YAML::BeginSeq;
  for (ActionIndex a = 0; a < model.questions.size(); ++a) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << model.questions[a].id;
    out << YAML::Key << "concept" << YAML::Value << model.graph.name(model.questions.concept_of(a));
    if (!model.observation.is_full_table()) {
      out << YAML::Key << "guess" << YAML::Value << model.observation.guess[a];
      out << YAML::Key << "fluency" << YAML::Value << model.observation.fluency[a];
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  if (model.observation.is_full_table()) {
    out << YAML::Key << "observationTable" << YAML::Value << YAML::BeginSeq;
    for (const auto& row : model.observation.full_table) {
      out << YAML::Flow << YAML::BeginSeq;
      for (double p : row) out << p;
      out << YAML::EndSeq;
    }
    out << YAML::EndSeq;
  }

  out << YAML::Key << "discount" << YAML::Value << model.discount;
  out << YAML::Key << "reward" << YAML::Value << YAML::Flow << model.reward.terminal;
  out << YAML::Key << "k" << YAML::Value << model.pattern_count();
  out << YAML::Key << "patternPrior" << YAML::Value << YAML::Flow
      << model.initial_pattern_belief();

  out << YAML::Key << "components" << YAML::Value << YAML::BeginSeq;
  for (const auto& comp : model.components) {
    out << YAML::BeginMap;
    out << YAML::Key << "initial" << YAML::Value << YAML::Flow << comp.initial;
    out << YAML::Key << "transitions" << YAML::Value << YAML::BeginMap;
    for (ConceptIndex c = 0; c < model.graph.size(); ++c) {
      out << YAML::Key << model.graph.name(c) << YAML::Value << YAML::BeginMap;
      for (StateIndex s = 0; s < space.size(); ++s) {
        out << YAML::Key << YAML::DoubleQuoted << space.state(s).to_string() << YAML::Value
            << YAML::Flow << YAML::BeginMap;
        for (const auto& e : comp.transition[c][s]) {
          out << YAML::Key << YAML::DoubleQuoted << space.state(e.to).to_string() << YAML::Value
              << e.probability;
        }
        out << YAML::EndMap;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndMap << YAML::EndMap;
  }
  out << YAML::EndSeq;

  if (model.fit) {
    out << YAML::Key << "fit" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "seed" << YAML::Value << model.fit->seed;
    out << YAML::Key << "iterations" << YAML::Value << model.fit->iterations;
    out << YAML::Key << "logLikelihood" << YAML::Value << model.fit->log_likelihood;
    out << YAML::Key << "converged" << YAML::Value << model.fit->converged;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  if (!out.good()) throw ContractError(std::string("model emitter failed: ") + out.GetLastError());
  return std::string(out.c_str()) + "\n";
}

void save_model(const HpomdpModel& model, const std::filesystem::path& path) {
  write_file(path, dump_model(model));
}

HpomdpModel parse_model(const std::string& text, const std::string& source) {
  const YAML::Node root = parse_yaml(text, source);
  check_version(root, source);
  ConceptGraph graph = read_graph(require(root, "graph", source, ""), source, "graph");

  StateMode mode{};
  try {
    mode = parse_state_mode(
        scalar<std::string>(require(root, "stateMode", source, ""), source, "stateMode"));
  } catch (const ContractError& e) {
    fail(source, "stateMode", e.what());
  }
  StateSpace space(graph, mode);
  if (const YAML::Node states = root["states"]) {
    if (!states.IsSequence() || states.size() != space.size()) {
      fail(source, "states", "does not match the state space of the graph");
    }
    for (std::size_t s = 0; s < space.size(); ++s) {
      if (scalar<std::string>(states[s], source, "states") != space.state(s).to_string()) {
        fail(source, "states[" + std::to_string(s) + "]", "out of canonical order");
      }
    }
  }
  auto state_index = [&](const std::string& text, const std::string& where) {
    KnowledgeState ks;
    try {
      ks = KnowledgeState::parse(text);
    } catch (const Error&) {
      fail(source, where, "bad state '" + text + "'");
    }
    const auto s = ks.concept_count() == graph.size() ? space.find(ks) : std::nullopt;
    if (!s) fail(source, where, "state '" + text + "' is not in the state space");
    return *s;
  };

  const YAML::Node qs = require(root, "questions", source, "");
  if (!qs.IsSequence()) fail(source, "questions", "expected a list");
  const bool full_table = static_cast<bool>(root["observationTable"]);
  std::vector<Question> questions;
  ObservationFunction observation;
  for (std::size_t a = 0; a < qs.size(); ++a) {
    const std::string at = "questions[" + std::to_string(a) + "]";
    const auto id = scalar<std::string>(require(qs[a], "id", source, at), source, at + ".id");
    const auto concept_name =
        scalar<std::string>(require(qs[a], "concept", source, at), source, at + ".concept");
    const auto c = graph.find(concept_name);
    if (!c) fail(source, at + ".concept", "'" + concept_name + "' is not in the graph");
    questions.push_back({id, *c});
    if (!full_table) {
      observation.guess.push_back(
          probability(require(qs[a], "guess", source, at), source, at + ".guess"));
      observation.fluency.push_back(
          probability(require(qs[a], "fluency", source, at), source, at + ".fluency"));
    }
  }
  QuestionCatalog catalog;
  try {
    catalog = QuestionCatalog(std::move(questions), graph.size());
  } catch (const ContractError& e) {
    fail(source, "questions", e.what());
  }
  if (full_table) {
    const YAML::Node table = root["observationTable"];
    if (!table.IsSequence() || table.size() != catalog.size()) {
      fail(source, "observationTable", "expected one row per question");
    }
    for (std::size_t a = 0; a < table.size(); ++a) {
      observation.full_table.push_back(probability_list(
          table[a], space.size(), source, "observationTable[" + std::to_string(a) + "]"));
    }
  }

  const double discount = root["discount"] ? scalar<double>(root["discount"], source, "discount")
                                           : 1.0;
  RewardSpec reward = RewardSpec::mastered_count(space);
  if (const YAML::Node r = root["reward"]) {
    if (!r.IsSequence() || r.size() != space.size()) fail(source, "reward", "one entry per state");
    for (std::size_t s = 0; s < r.size(); ++s) {
      reward.terminal[s] = scalar<double>(r[s], source, "reward[" + std::to_string(s) + "]");
    }
  }

  const YAML::Node comps = require(root, "components", source, "");
  if (!comps.IsSequence() || comps.size() == 0) fail(source, "components", "expected a non-empty list");
  if (const YAML::Node k = root["k"]) {
    if (scalar<std::size_t>(k, source, "k") != comps.size()) {
      fail(source, "k", "does not match the number of components");
    }
  }
  std::vector<PatternComponent> components;
  for (std::size_t j = 0; j < comps.size(); ++j) {
    const std::string at = "components[" + std::to_string(j) + "]";
    PatternComponent comp;
    comp.initial = probability_list(require(comps[j], "initial", source, at), space.size(), source,
                                    at + ".initial");
    const YAML::Node trans = require(comps[j], "transitions", source, at);
    comp.transition.resize(graph.size());
    for (ConceptIndex c = 0; c < graph.size(); ++c) {
      const std::string cat = at + ".transitions." + graph.name(c);
      const YAML::Node rows = require(trans, graph.name(c), source, at + ".transitions");
      if (!rows.IsMap()) fail(source, cat, "expected a mapping from state to row");
      comp.transition[c].resize(space.size());
      std::vector<bool> seen(space.size(), false);
      for (const auto& kv : rows) {
        const auto from_text = scalar<std::string>(kv.first, source, cat);
        const StateIndex from = state_index(from_text, cat + "." + quoted_key(from_text));
        const std::string rat = cat + "." + quoted_key(from_text);
        if (seen[from]) fail(source, rat, "duplicate row");
        seen[from] = true;
        if (!kv.second.IsMap()) fail(source, rat, "expected a mapping from state to probability");
        const auto flip = space.flip_target(from, c);
        TransitionRow row;
        double self = 0.0, flipped = 0.0, sum = 0.0;
        bool has_flip = false;
        for (const auto& e : kv.second) {
          const auto to_text = scalar<std::string>(e.first, source, rat);
          const StateIndex to = state_index(to_text, rat);
          const double p = probability(e.second, source, rat + "." + quoted_key(to_text));
          sum += p;
          if (to == from) {
            self = p;
          } else if (flip && to == *flip) {
            flipped = p;
            has_flip = true;
          } else if (p > 0.0) {
            fail(source, rat,
                 "moves mass to " + to_text + ", which is not the feasible mastery of " +
                     graph.name(c));
          }
        }
        if (std::abs(sum - 1.0) > kStochasticTolerance) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "row sums to " << sum << ", not 1";
          fail(source, rat, msg.str());
        }
        row.push_back({from, self});
        if (flip) row.push_back({*flip, has_flip ? flipped : 0.0});
        comp.transition[c][from] = std::move(row);
      }
      for (StateIndex s = 0; s < space.size(); ++s) {
        if (!seen[s]) fail(source, cat, "missing row for state " + space.state(s).to_string());
      }
    }
    components.push_back(std::move(comp));
  }

  std::vector<double> prior;
  if (const YAML::Node p = root["patternPrior"]) {
    prior = probability_list(p, components.size(), source, "patternPrior");
  }
  std::optional<FitMetadata> fit;
  if (const YAML::Node f = root["fit"]) {
    FitMetadata m;
    m.seed = scalar<std::uint64_t>(require(f, "seed", source, "fit"), source, "fit.seed");
    m.iterations =
        scalar<std::size_t>(require(f, "iterations", source, "fit"), source, "fit.iterations");
    m.log_likelihood = scalar<double>(require(f, "logLikelihood", source, "fit"), source,
                                      "fit.logLikelihood");
    m.converged = scalar<bool>(require(f, "converged", source, "fit"), source, "fit.converged");
    fit = m;
  }

  HpomdpModel model{std::move(graph),      std::move(space), std::move(catalog),
                    std::move(components), std::move(observation), std::move(reward),
                    discount,              {},               std::move(prior),
                    fit};
  if (const auto v = validate_model(model); !v.empty()) {
    fail(source, v.front().location, "violates " + v.front().invariant);
  }
  return model;
}

HpomdpModel load_model(const std::filesystem::path& path) {
  return parse_model(read_file(path), path.string());
}

// ---- cohort ----

std::string dump_cohort(const CohortResult& cohort, const ConceptGraph& graph) {
  const auto metrics = strategy_metrics(cohort, graph);
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "formatVersion" << YAML::Value << YAML::DoubleQuoted << kFormatVersion;
  out << YAML::Key << "policy" << YAML::Value << cohort.policy_label;
  out << YAML::Key << "episodes" << YAML::Value << cohort.episodes;
  out << YAML::Key << "graph" << YAML::Value;
  emit_graph(out, graph);
  out << YAML::Key << "finalStates" << YAML::Value << YAML::BeginSeq;
  for (std::size_t s = 0; s < cohort.states.size(); ++s) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "state" << YAML::Value << YAML::DoubleQuoted << cohort.states[s].to_string();
    out << YAML::Key << "probability" << YAML::Value << cohort.final_state_distribution[s];
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "metrics" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "proficiency" << YAML::Value << YAML::BeginMap;
  for (ConceptIndex c = 0; c < graph.size(); ++c) {
    out << YAML::Key << graph.name(c) << YAML::Value << metrics.proficiency[c];
  }
  out << YAML::EndMap;
  out << YAML::Key << "proSum" << YAML::Value << metrics.pro_sum;
  out << YAML::Key << "variance" << YAML::Value << metrics.variance;
  out << YAML::EndMap;
  out << YAML::Key << "masteredCounts" << YAML::Value << YAML::Flow << cohort.mastered_counts;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_cohort(const CohortResult& cohort, const ConceptGraph& graph,
                 const std::filesystem::path& path) {
  write_file(path, dump_cohort(cohort, graph));
}

LoadedCohort parse_cohort(const std::string& text, const std::string& source) {
  const YAML::Node root = parse_yaml(text, source);
  check_version(root, source);
  ConceptGraph graph = read_graph(require(root, "graph", source, ""), source, "graph");
  CohortResult r;
  r.policy_label = scalar<std::string>(require(root, "policy", source, ""), source, "policy");
  r.episodes = scalar<std::size_t>(require(root, "episodes", source, ""), source, "episodes");
  const YAML::Node finals = require(root, "finalStates", source, "");
  if (!finals.IsSequence()) fail(source, "finalStates", "expected a list");
  double sum = 0.0;
  for (std::size_t i = 0; i < finals.size(); ++i) {
    const std::string at = "finalStates[" + std::to_string(i) + "]";
    const auto text_state =
        scalar<std::string>(require(finals[i], "state", source, at), source, at + ".state");
    KnowledgeState ks;
    try {
      ks = KnowledgeState::parse(text_state);
    } catch (const Error&) {
      fail(source, at + ".state", "bad state '" + text_state + "'");
    }
    if (ks.concept_count() != graph.size()) fail(source, at + ".state", "wrong length");
    r.states.push_back(ks);
    const double p = probability(require(finals[i], "probability", source, at), source,
                                 at + ".probability");
    r.final_state_distribution.push_back(p);
    sum += p;
  }
  if (std::abs(sum - 1.0) > kStochasticTolerance) fail(source, "finalStates", "does not sum to 1");
  const YAML::Node counts = require(root, "masteredCounts", source, "");
  if (!counts.IsSequence()) fail(source, "masteredCounts", "expected a list");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    r.mastered_counts.push_back(
        scalar<int>(counts[i], source, "masteredCounts[" + std::to_string(i) + "]"));
  }
  if (r.mastered_counts.size() != r.episodes) {
    fail(source, "masteredCounts", "length differs from episodes");
  }
  return {std::move(graph), std::move(r)};
}

LoadedCohort load_cohort(const std::filesystem::path& path) {
  return parse_cohort(read_file(path), path.string());
}

}  // namespace hpomdp

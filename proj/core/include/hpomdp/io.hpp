#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hpomdp/domain.hpp"
#include "hpomdp/simulation.hpp"

namespace hpomdp {

inline constexpr const char* kFormatVersion = "1";

// Which columns of an answer log hold what, and how raw correctness values decode.
struct ColumnMapping {
  std::string sequence_key = "seq_id";
  std::string student_key = "account_no";
  std::string question_key = "exam_id";
  std::string concept_key = "knowledge_concept_id";
  std::string correctness_key = "is_right";
  // Partial credit (I02) counts as incorrect.
  std::map<std::string, bool> decoder = {
      {"I01", true}, {"I02", false}, {"I03", false}, {"1", true}, {"0", false}};
};

struct IngestionReport {
  std::size_t rows = 0;
  std::size_t kept = 0;
  std::size_t dropped_unknown_concept = 0;
  std::size_t dropped_bad_sequence = 0;
  std::size_t dropped_bad_correctness = 0;
  std::size_t dropped_malformed = 0;  // too few fields
  std::size_t students = 0;
  std::size_t questions = 0;
  std::map<std::string, std::size_t> concept_coverage;  // kept rows per concept
  std::vector<std::string> warnings;
};

struct IngestionResult {
  Dataset dataset;
  IngestionReport report;
};

// Reads a comma- or tab-delimited log with a header row. Rows are grouped by student and
// ordered by the numeric sequence key; questions are sorted by id and take the majority
// concept of their rows.
IngestionResult ingest_logs(const std::filesystem::path& path, const ColumnMapping& mapping,
                            const ConceptGraph& graph);
IngestionResult ingest_logs(std::istream& in, const ColumnMapping& mapping,
                            const ConceptGraph& graph);

std::string format_ingestion_report(const IngestionReport& report);

// Canonical dataset file: tab-separated `student step question concept correct`, one step
// per line, sorted by (student, step), steps 1-based.
void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(std::istream& in, const ConceptGraph& graph, const std::string& source);
Dataset read_dataset(const std::filesystem::path& path, const ConceptGraph& graph);

ConceptGraph load_graph(const std::filesystem::path& path);
ConceptGraph parse_graph(const std::string& text, const std::string& source = "<graph>");
void save_graph(const ConceptGraph& graph, const std::filesystem::path& path);
std::string dump_graph(const ConceptGraph& graph);

// Model files are YAML with 17 significant digits per probability, so a round trip is exact.
void save_model(const HpomdpModel& model, const std::filesystem::path& path);
std::string dump_model(const HpomdpModel& model);
HpomdpModel load_model(const std::filesystem::path& path);
HpomdpModel parse_model(const std::string& text, const std::string& source = "<model>");

void save_cohort(const CohortResult& cohort, const ConceptGraph& graph,
                 const std::filesystem::path& path);
std::string dump_cohort(const CohortResult& cohort, const ConceptGraph& graph);

struct LoadedCohort {
  ConceptGraph graph;
  CohortResult result;
};
LoadedCohort load_cohort(const std::filesystem::path& path);
LoadedCohort parse_cohort(const std::string& text, const std::string& source = "<cohort>");

}  // namespace hpomdp

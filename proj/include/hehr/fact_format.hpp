#pragma once

// HEHR unified fact format.
//
// One fact per line:
//
//   <<relation, entity_1, ..., entity_n>>; qual_rel_1, qual_ent_1; ...
//
// Tokens are trimmed of surrounding whitespace and may not contain any of
// `<`, `>`, `,`, `;`, `#`. Blank lines and lines whose first non-blank
// character is `#` are comments. A comment of the form `#@relation NAME` or
// `#@entity NAME` additionally declares a vocabulary token up front, so that
// ids can be reserved for tokens no fact uses yet.

#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hehr {

struct QualifierPair {
  std::string relation;
  std::string entity;

  friend bool operator==(const QualifierPair&, const QualifierPair&) = default;
};

struct FactRecord {
  std::string relation;
  std::vector<std::string> primary;
  std::vector<QualifierPair> qualifiers;

  std::size_t arity() const { return primary.size(); }

  friend bool operator==(const FactRecord&, const FactRecord&) = default;
};

enum class Severity { error, warning };

struct ParseDiagnostic {
  std::size_t line_number;
  Severity severity;
  std::string message;
};

struct ParsedDataset {
  std::vector<FactRecord> records;
  std::vector<ParseDiagnostic> diagnostics;
  std::vector<std::string> declared_entities;
  std::vector<std::string> declared_relations;
};

enum class ExternalFormat { triple_tsv, hyperedge_csv, hyper_relational_statements };

struct ConvertOptions {
  // Skip malformed rows (recording a warning) instead of throwing.
  bool lenient = false;
  // Drop exact duplicate records, keeping the first occurrence.
  bool dedup = false;
};

struct ConvertResult {
  std::vector<FactRecord> records;
  std::vector<ParseDiagnostic> diagnostics;
};

struct ValidationReport {
  std::size_t fact_count = 0;
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::size_t primary_relation_count = 0;
  std::size_t qualifier_relation_count = 0;
  std::map<std::size_t, std::size_t> arity_histogram;
  std::size_t facts_with_qualifiers = 0;
  double qualifier_ratio = 0.0;
  std::size_t duplicate_facts = 0;
};

// True if `c` may not appear inside a token.
bool is_reserved_char(char c);

// Throws InvalidToken if `token` is empty after trimming or holds a reserved
// character.
void check_token(std::string_view token);

// `line_number` is only used for diagnostics.
FactRecord parse_fact_line(std::string_view line, std::size_t line_number = 1);

std::string serialize_fact(const FactRecord& record);

ParsedDataset parse_dataset(std::istream& in);
ParsedDataset parse_dataset_file(const std::string& path);

ExternalFormat parse_format_id(std::string_view id);
std::string_view format_id_name(ExternalFormat format);

ConvertResult convert_external(ExternalFormat format, std::istream& in,
                               const ConvertOptions& options = {});

ValidationReport validate_dataset(const std::vector<FactRecord>& records);

// `key: value` lines.
std::string format_report_text(const ValidationReport& report);
std::string format_report_json(const ValidationReport& report);

void write_dataset(std::ostream& out, const std::vector<FactRecord>& records);

}  // namespace hehr

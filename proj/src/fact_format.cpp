#include "hehr/fact_format.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "hehr/errors.hpp"
#include "json.hpp"

namespace hehr {

namespace {

constexpr std::string_view kWhitespace = " \t\r\n\v\f";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(kWhitespace);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(kWhitespace);
  return s.substr(first, last - first + 1);
}

// Cursor over one fact line. Columns are reported 1-based.
class LineParser {
 public:
  LineParser(std::string_view line, std::size_t line_number)
      : line_(line), line_number_(line_number) {}

  FactRecord parse() {
    FactRecord record;
    skip_ws();
    expect("<<", "expected '<<' opening the primary tuple");

    std::vector<std::string> tuple;
    tuple.push_back(token(",>", "primary tuple"));
    while (peek() == ',') {
      ++pos_;
      tuple.push_back(token(",>", "primary tuple"));
    }
    expect(">>", "expected '>>' closing the primary tuple");
    if (tuple.size() < 2) {
      fail(pos_, "primary tuple needs a relation and at least one entity");
    }
    record.relation = std::move(tuple.front());
    record.primary.assign(std::make_move_iterator(tuple.begin() + 1),
                          std::make_move_iterator(tuple.end()));

    skip_ws();
    while (pos_ < line_.size()) {
      if (peek() != ';') fail(pos_, "expected ';' before a qualifier group");
      ++pos_;
      QualifierPair pair;
      pair.relation = token(",;", "qualifier group");
      if (peek() != ',') fail(pos_, "qualifier group must be a pair 'relation, entity'");
      ++pos_;
      pair.entity = token(",;", "qualifier group");
      if (peek() == ',') fail(pos_, "qualifier group must be a pair 'relation, entity'");
      record.qualifiers.push_back(std::move(pair));
      skip_ws();
    }
    return record;
  }

 private:
  char peek() const { return pos_ < line_.size() ? line_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < line_.size() && kWhitespace.find(line_[pos_]) != std::string_view::npos) {
      ++pos_;
    }
  }

  void expect(std::string_view lit, const char* msg) {
    if (line_.substr(pos_, lit.size()) != lit) fail(pos_, msg);
    pos_ += lit.size();
  }

  // Reads up to (not including) the first character in `stops`. Any other
  // reserved character inside the span is an error.
  std::string token(std::string_view stops, const char* context) {
    const std::size_t start = pos_;
    while (pos_ < line_.size() && stops.find(line_[pos_]) == std::string_view::npos) {
      if (is_reserved_char(line_[pos_])) {
        if (line_[pos_] == '<' || line_[pos_] == '>') {
          fail(pos_, std::string("unbalanced '<<'/'>>' in ") + context);
        }
        fail(pos_, std::string("reserved character '") + line_[pos_] + "' in " + context);
      }
      ++pos_;
    }
    const auto tok = trim(line_.substr(start, pos_ - start));
    if (tok.empty()) fail(start, std::string("empty token in ") + context);
    if (pos_ < line_.size() && line_[pos_] == '>' && line_.substr(pos_, 2) != ">>") {
      fail(pos_, "unbalanced '<<'/'>>'");
    }
    return std::string(tok);
  }

  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw GrammarError(line_number_, at + 1, msg);
  }

  std::string_view line_;
  std::size_t line_number_;
  std::size_t pos_ = 0;
};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    if (at == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, at - start));
    start = at + 1;
  }
}

std::string checked(std::string_view raw) {
  const auto tok = trim(raw);
  check_token(tok);
  return std::string(tok);
}

FactRecord convert_row(ExternalFormat format, std::string_view row) {
  switch (format) {
    case ExternalFormat::triple_tsv: {
      const auto cols = split(row, '\t');
      if (cols.size() != 3) {
        throw RowShapeError("triple row needs exactly 3 tab-separated columns, got " +
                            std::to_string(cols.size()));
      }
      return FactRecord{checked(cols[1]), {checked(cols[0]), checked(cols[2])}, {}};
    }
    case ExternalFormat::hyperedge_csv: {
      const auto cols = split(row, ',');
      if (cols.size() < 2) {
        throw RowShapeError("hyperedge row needs a relation and at least one entity");
      }
      FactRecord rec{checked(cols[0]), {}, {}};
      for (std::size_t i = 1; i < cols.size(); ++i) rec.primary.push_back(checked(cols[i]));
      return rec;
    }
    case ExternalFormat::hyper_relational_statements: {
      const auto cols = split(row, ',');
      if (cols.size() < 3) {
        throw RowShapeError("statement row needs subject, relation and object");
      }
      if ((cols.size() - 3) % 2 != 0) {
        throw RowShapeError("statement row has an odd number of qualifier tokens");
      }
      FactRecord rec{checked(cols[1]), {checked(cols[0]), checked(cols[2])}, {}};
      for (std::size_t i = 3; i < cols.size(); i += 2) {
        rec.qualifiers.push_back({checked(cols[i]), checked(cols[i + 1])});
      }
      return rec;
    }
  }
  throw UnknownFormat("unregistered converter");
}

bool is_comment_or_blank(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

void read_declaration(std::string_view line, std::size_t line_number, ParsedDataset& out) {
  const auto t = trim(line);
  constexpr std::string_view kRel = "#@relation";
  constexpr std::string_view kEnt = "#@entity";
  std::string_view rest;
  std::vector<std::string>* target = nullptr;
  if (t.starts_with(kRel)) {
    rest = t.substr(kRel.size());
    target = &out.declared_relations;
  } else if (t.starts_with(kEnt)) {
    rest = t.substr(kEnt.size());
    target = &out.declared_entities;
  } else {
    return;
  }
  const auto tok = trim(rest);
  if (tok.empty() || rest.size() == tok.size()) return;
  try {
    check_token(tok);
  } catch (const InvalidToken& e) {
    out.diagnostics.push_back({line_number, Severity::error, e.what()});
    return;
  }
  target->emplace_back(tok);
}

}  // namespace

bool is_reserved_char(char c) {
  return c == '<' || c == '>' || c == ',' || c == ';' || c == '#';
}

void check_token(std::string_view token) {
  const auto t = trim(token);
  if (t.empty()) throw InvalidToken("empty token");
  if (t.size() != token.size()) throw InvalidToken("token has surrounding whitespace: '" + std::string(token) + "'");
  for (char c : t) {
    if (is_reserved_char(c)) {
      throw InvalidToken("token '" + std::string(token) + "' contains reserved character '" + c + "'");
    }
    if (c == '\n' || c == '\r') throw InvalidToken("token contains a line break");
  }
}

FactRecord parse_fact_line(std::string_view line, std::size_t line_number) {
  return LineParser(line, line_number).parse();
}

std::string serialize_fact(const FactRecord& record) {
  if (record.primary.empty()) throw InvalidToken("fact has no primary entities");
  check_token(record.relation);
  std::string out = "<<" + record.relation;
  for (const auto& e : record.primary) {
    check_token(e);
    out += ", ";
    out += e;
  }
  out += ">>";
  for (const auto& q : record.qualifiers) {
    check_token(q.relation);
    check_token(q.entity);
    out += "; ";
    out += q.relation;
    out += ", ";
    out += q.entity;
  }
  return out;
}

ParsedDataset parse_dataset(std::istream& in) {
  if (!in) throw IoFailure("unreadable input stream");
  ParsedDataset out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (is_comment_or_blank(line)) {
      read_declaration(line, line_number, out);
      continue;
    }
    try {
      out.records.push_back(parse_fact_line(line, line_number));
    } catch (const GrammarError& e) {
      out.diagnostics.push_back({line_number, Severity::error, e.what()});
    }
  }
  if (in.bad()) throw IoFailure("read error after line " + std::to_string(line_number));
  return out;
}

ParsedDataset parse_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open '" + path + "'");
  return parse_dataset(in);
}

ExternalFormat parse_format_id(std::string_view id) {
  if (id == "triple_tsv") return ExternalFormat::triple_tsv;
  if (id == "hyperedge_csv") return ExternalFormat::hyperedge_csv;
  if (id == "hyper_relational_statements") return ExternalFormat::hyper_relational_statements;
  throw UnknownFormat("unknown format '" + std::string(id) + "'");
}

std::string_view format_id_name(ExternalFormat format) {
  switch (format) {
    case ExternalFormat::triple_tsv: return "triple_tsv";
    case ExternalFormat::hyperedge_csv: return "hyperedge_csv";
    case ExternalFormat::hyper_relational_statements: return "hyper_relational_statements";
  }
  return "?";
}

ConvertResult convert_external(ExternalFormat format, std::istream& in,
                               const ConvertOptions& options) {
  if (!in) throw IoFailure("unreadable input stream");
  ConvertResult out;
  std::set<std::tuple<std::string, std::vector<std::string>, std::vector<std::pair<std::string, std::string>>>> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    FactRecord rec;
    try {
      rec = convert_row(format, line);
    } catch (const Error& e) {
      if (!options.lenient) {
        throw RowShapeError("line " + std::to_string(line_number) + ": " + e.what());
      }
      out.diagnostics.push_back({line_number, Severity::warning, e.what()});
      continue;
    }
    if (options.dedup) {
      std::vector<std::pair<std::string, std::string>> quals;
      for (const auto& q : rec.qualifiers) quals.emplace_back(q.relation, q.entity);
      if (!seen.emplace(rec.relation, rec.primary, std::move(quals)).second) continue;
    }
    out.records.push_back(std::move(rec));
  }
  if (in.bad()) throw IoFailure("read error after line " + std::to_string(line_number));
  return out;
}

ValidationReport validate_dataset(const std::vector<FactRecord>& records) {
  ValidationReport r;
  std::set<std::string> entities, relations, primary_rel, qual_rel;
  std::set<std::string> facts;
  for (const auto& f : records) {
    ++r.fact_count;
    relations.insert(f.relation);
    primary_rel.insert(f.relation);
    for (const auto& e : f.primary) entities.insert(e);
    for (const auto& q : f.qualifiers) {
      relations.insert(q.relation);
      qual_rel.insert(q.relation);
      entities.insert(q.entity);
    }
    ++r.arity_histogram[f.arity()];
    if (!f.qualifiers.empty()) ++r.facts_with_qualifiers;
    if (!facts.insert(serialize_fact(f)).second) ++r.duplicate_facts;
  }
  r.entity_count = entities.size();
  r.relation_count = relations.size();
  r.primary_relation_count = primary_rel.size();
  r.qualifier_relation_count = qual_rel.size();
  r.qualifier_ratio = r.fact_count == 0 ? 0.0
                                        : static_cast<double>(r.facts_with_qualifiers) /
                                              static_cast<double>(r.fact_count);
  return r;
}

std::string format_report_text(const ValidationReport& r) {
  std::ostringstream os;
  os << "facts: " << r.fact_count << '\n'
     << "entities: " << r.entity_count << '\n'
     << "relations: " << r.relation_count << '\n'
     << "primary_relations: " << r.primary_relation_count << '\n'
     << "qualifier_relations: " << r.qualifier_relation_count << '\n';
  for (const auto& [arity, count] : r.arity_histogram) {
    os << "arity_" << arity << ": " << count << '\n';
  }
  os << "facts_with_qualifiers: " << r.facts_with_qualifiers << '\n'
     << "qualifier_ratio: " << r.qualifier_ratio << '\n'
     << "duplicate_facts: " << r.duplicate_facts << '\n';
  return os.str();
}

std::string format_report_json(const ValidationReport& r) {
  nlohmann::json j;
  j["facts"] = r.fact_count;
  j["entities"] = r.entity_count;
  j["relations"] = r.relation_count;
  j["primary_relations"] = r.primary_relation_count;
  j["qualifier_relations"] = r.qualifier_relation_count;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [arity, count] : r.arity_histogram) hist[std::to_string(arity)] = count;
  j["arity_histogram"] = hist;
  j["facts_with_qualifiers"] = r.facts_with_qualifiers;
  j["qualifier_ratio"] = r.qualifier_ratio;
  j["duplicate_facts"] = r.duplicate_facts;
  return j.dump(2);
}

void write_dataset(std::ostream& out, const std::vector<FactRecord>& records) {
  for (const auto& r : records) out << serialize_fact(r) << '\n';
  if (!out) throw IoFailure("write failed");
}

}  // namespace hehr

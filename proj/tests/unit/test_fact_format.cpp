#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "hehr/errors.hpp"
#include "hehr/fact_format.hpp"

using namespace hehr;

namespace {

const FactRecord kFact5{"PlayedTogether", {"Messi", "Suarez", "Neymar"}, {{"PlayedInTeam", "FC Barcelona"}}};
const FactRecord kFact6{"PlayedTogether", {"Messi", "Di Maria", "Martinez"}, {{"PlayedInTeam", "Argentina"}}};

std::string random_token(std::mt19937_64& rng) {
  static const std::string alphabet = "abcXYZ019_-.:()'/ ";
  std::uniform_int_distribution<std::size_t> len(1, 10), pick(0, alphabet.size() - 1);
  std::string t;
  while (t.empty() || t.front() == ' ' || t.back() == ' ') {
    t.clear();
    for (std::size_t i = 0, n = len(rng); i < n; ++i) t += alphabet[pick(rng)];
  }
  return t;
}

std::multiset<std::string> tokens_of(const FactRecord& f) {
  std::multiset<std::string> out{f.relation};
  out.insert(f.primary.begin(), f.primary.end());
  for (const auto& q : f.qualifiers) {
    out.insert(q.relation);
    out.insert(q.entity);
  }
  return out;
}

}  // namespace

TEST_CASE("parse the two example facts") {
  CHECK(parse_fact_line("<<PlayedTogether, Messi, Suarez, Neymar>>; PlayedInTeam, FC Barcelona") == kFact5);
  CHECK(parse_fact_line("<<PlayedTogether, Messi, Di Maria, Martinez>>; PlayedInTeam, Argentina") == kFact6);
  const auto born = parse_fact_line("<<BornIn, Messi, Argentina>>");
  CHECK(born == FactRecord{"BornIn", {"Messi", "Argentina"}, {}});
  CHECK(born.arity() == 2);
}

TEST_CASE("tokens are trimmed and keep interior spaces") {
  const auto f = parse_fact_line("  <<  r ,  New  York , b >> ;  q1 , v 1 ;q2,v2  ");
  CHECK(f == FactRecord{"r", {"New  York", "b"}, {{"q1", "v 1"}, {"q2", "v2"}}});
}

TEST_CASE("arity one is accepted") {
  CHECK(parse_fact_line("<<Exists, Messi>>").arity() == 1);
}

TEST_CASE("grammar errors carry line and column") {
  const char* bad[] = {
      "<<r, a, b",          // unclosed
      "r, a, b>>",          // no opening
      "<<r, , b>>",         // empty token
      "<<r>>",              // relation without entities
      "<<r, a>>; q",        // qualifier missing value
      "<<r, a>>; q, v, w",  // qualifier with three tokens
      "<<r, a>> trailing",  // junk after tuple
      "<<r, a<b>>",         // reserved char inside token
      "",
  };
  for (const char* line : bad) {
    CAPTURE(line);
    try {
      parse_fact_line(line, 7);
      FAIL("expected GrammarError");
    } catch (const GrammarError& e) {
      CHECK(e.line() == 7);
      CHECK(e.column() >= 1);
    }
  }
}

TEST_CASE("serialize canonical form") {
  CHECK(serialize_fact({"BornIn", {"Messi", "Argentina"}, {}}) == "<<BornIn, Messi, Argentina>>");
  CHECK(serialize_fact(kFact5) == "<<PlayedTogether, Messi, Suarez, Neymar>>; PlayedInTeam, FC Barcelona");
  CHECK_THROWS_AS(serialize_fact({"Born;In", {"a"}, {}}), InvalidToken);
  CHECK_THROWS_AS(serialize_fact({"r", {"a#b"}, {}}), InvalidToken);
  CHECK_THROWS_AS(serialize_fact({"r", {}, {}}), InvalidToken);
}

TEST_CASE("round trip over random records") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> arity(1, 5), quals(0, 3);
  for (int i = 0; i < 1000; ++i) {
    FactRecord f;
    f.relation = random_token(rng);
    for (int k = 0, n = arity(rng); k < n; ++k) f.primary.push_back(random_token(rng));
    for (int k = 0, n = quals(rng); k < n; ++k) f.qualifiers.push_back({random_token(rng), random_token(rng)});
    REQUIRE(parse_fact_line(serialize_fact(f)) == f);
  }
}

TEST_CASE("parse_dataset skips comments and reports malformed lines") {
  std::istringstream empty("");
  const auto none = parse_dataset(empty);
  CHECK(none.records.empty());
  CHECK(none.diagnostics.empty());

  std::istringstream two(serialize_fact(kFact5) + "\n" + serialize_fact(kFact6) + "\n");
  const auto ok = parse_dataset(two);
  CHECK(ok.records == std::vector<FactRecord>{kFact5, kFact6});
  CHECK(ok.diagnostics.empty());

  std::istringstream mixed("# header\n<<r, a, b>>\n\n<<r, a\n  # indented comment\n<<s, c>>; q, d\n");
  const auto m = parse_dataset(mixed);
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[1].relation == "s");
  REQUIRE(m.diagnostics.size() == 1);
  CHECK(m.diagnostics[0].line_number == 4);
  CHECK(m.diagnostics[0].severity == Severity::error);
}

TEST_CASE("declaration comments") {
  std::istringstream in("#@relation BornIn\n#@entity Nobody\n# plain comment\n<<r, a>>\n#@relation\n#@entity a;b\n");
  const auto d = parse_dataset(in);
  CHECK(d.declared_relations == std::vector<std::string>{"BornIn"});
  CHECK(d.declared_entities == std::vector<std::string>{"Nobody"});
  CHECK(d.records.size() == 1);
  CHECK(d.diagnostics.size() == 1);
}

TEST_CASE("parse_dataset never throws on arbitrary bytes") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 40);
  for (int i = 0; i < 500; ++i) {
    std::string text;
    for (int k = 0, n = len(rng) * 5; k < n; ++k) text += static_cast<char>(byte(rng));
    std::istringstream in(text);
    ParsedDataset d;
    CHECK_NOTHROW(d = parse_dataset(in));
    std::size_t lines = 0;
    std::istringstream count(text);
    for (std::string l; std::getline(count, l);) ++lines;
    CHECK(d.records.size() + d.diagnostics.size() <= lines);
  }
}

TEST_CASE("parse_dataset_file on a missing path") {
  CHECK_THROWS_AS(parse_dataset_file("/nonexistent/facts.hehr"), IoFailure);
}

TEST_CASE("convert triple rows") {
  std::istringstream in("Messi\tBornIn\tArgentina\nSuarez\tBornIn\tUruguay\n");
  const auto r = convert_external(ExternalFormat::triple_tsv, in);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0] == FactRecord{"BornIn", {"Messi", "Argentina"}, {}});

  std::istringstream short_row("Messi\tBornIn\n");
  CHECK_THROWS_AS(convert_external(ExternalFormat::triple_tsv, short_row), RowShapeError);
}

TEST_CASE("convert hyperedge rows") {
  std::istringstream in("PlayedTogether,Messi,Suarez,Neymar\n");
  const auto r = convert_external(ExternalFormat::hyperedge_csv, in);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0] == FactRecord{"PlayedTogether", {"Messi", "Suarez", "Neymar"}, {}});
}

TEST_CASE("convert statement rows") {
  const std::string row = "Messi,PlayedTogether,Gerard Pique,InClub,FC Barcelona,Period,2008-21";
  std::istringstream in(row + "\n");
  const auto r = convert_external(ExternalFormat::hyper_relational_statements, in);
  REQUIRE(r.records.size() == 1);
  const FactRecord want{"PlayedTogether", {"Messi", "Gerard Pique"}, {{"InClub", "FC Barcelona"}, {"Period", "2008-21"}}};
  CHECK(r.records[0] == want);
  // Every source token survives conversion and serialization.
  const auto back = parse_fact_line(serialize_fact(r.records[0]));
  std::multiset<std::string> source;
  std::istringstream cells(row);
  for (std::string c; std::getline(cells, c, ',');) source.insert(c);
  CHECK(tokens_of(back) == source);

  std::istringstream odd("s,r,o,q1\n");
  CHECK_THROWS_AS(convert_external(ExternalFormat::hyper_relational_statements, odd), RowShapeError);
}

TEST_CASE("lenient conversion and dedup") {
  std::istringstream in("a\tr\tb\nbroken\na\tr\tb\nc\tr\td\n");
  const auto r = convert_external(ExternalFormat::triple_tsv, in, {true, true});
  CHECK(r.records.size() == 2);
  REQUIRE(r.diagnostics.size() == 1);
  CHECK(r.diagnostics[0].line_number == 2);
  CHECK(r.diagnostics[0].severity == Severity::warning);
}

TEST_CASE("format ids") {
  CHECK(parse_format_id("triple_tsv") == ExternalFormat::triple_tsv);
  CHECK(parse_format_id("hyperedge_csv") == ExternalFormat::hyperedge_csv);
  CHECK(parse_format_id("hyper_relational_statements") == ExternalFormat::hyper_relational_statements);
  CHECK(format_id_name(ExternalFormat::hyperedge_csv) == "hyperedge_csv");
  CHECK_THROWS_AS(parse_format_id("rdf"), UnknownFormat);
}

TEST_CASE("validation report") {
  const auto r = validate_dataset({kFact5, kFact6});
  CHECK(r.fact_count == 2);
  CHECK(r.entity_count == 7);
  CHECK(r.relation_count == 2);
  CHECK(r.arity_histogram == std::map<std::size_t, std::size_t>{{3, 2}});
  CHECK(r.qualifier_ratio == 1.0);
  CHECK(r.duplicate_facts == 0);

  const auto empty = validate_dataset({});
  CHECK(empty.fact_count == 0);
  CHECK(empty.entity_count == 0);
  CHECK(empty.qualifier_ratio == 0.0);
  CHECK(empty.arity_histogram.empty());

  const FactRecord plain{"r", {"a", "b"}, {}};
  const auto quarter = validate_dataset({plain, plain, {"r", {"c", "d"}, {}}, kFact5});
  CHECK(quarter.qualifier_ratio == 0.25);
  CHECK(quarter.duplicate_facts == 1);
}

TEST_CASE("report renderings") {
  const auto r = validate_dataset({kFact5, kFact6});
  const auto text = format_report_text(r);
  CHECK(text.find("facts: 2\n") != std::string::npos);
  CHECK(text.find("arity_3: 2\n") != std::string::npos);
  const auto json = format_report_json(r);
  CHECK(json.find("\"entities\": 7") != std::string::npos);
}

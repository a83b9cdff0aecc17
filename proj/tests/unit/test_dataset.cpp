#include <doctest.h>

#include <set>
#include <sstream>

#include "retail_fixture.hpp"
#include "sc2t/dataset.hpp"
#include "sc2t/error.hpp"
#include "sc2t/rng.hpp"
#include "sc2t/text_grid.hpp"

using namespace sc2t;

namespace {

std::vector<RetailRecord> head_records() {
  std::istringstream is(testing::kRetailCsvHead);
  return load_retail_csv(is);
}

std::vector<LabeledDocument> fixture_docs(std::size_t invoices, std::uint64_t seed = 2010) {
  testing::RetailFixtureOptions opt;
  opt.invoices = invoices;
  opt.seed = seed;
  std::istringstream is(testing::make_retail_csv(opt));
  return synthesize_messages(load_retail_csv(is), 0);
}

std::vector<std::string> words(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

}  // namespace

TEST_SUITE("dataset_lab") {
  TEST_CASE("CSV parsing handles quotes, commas and doubled quotes") {
    const auto f = parse_csv_line(R"(a,"b, c","say ""hi""",,e)");
    REQUIRE(f.size() == 5);
    CHECK(f[1] == "b, c");
    CHECK(f[2] == "say \"hi\"");
    CHECK(f[3].empty());
    CHECK_THROWS_AS(parse_csv_line("a,\"open"), DataError);
  }

  TEST_CASE("normalization joins words and fills the customer") {
    const auto r = normalize_record({"536365", "85123A", "  WHITE HANGING  HEART T-LIGHT ", "6", "12/1/2010 8:26",
                                     "2.55", "", "United Kingdom"});
    CHECK(r.description == "WHITE_HANGING_HEART_T-LIGHT");
    CHECK(r.invoice_date == "12/1/2010_8:26");
    CHECK(r.customer_id == "00000");
    CHECK(r.country == "United_Kingdom");
  }

  TEST_CASE("loader: BOM, CRLF, column count, missing header") {
    std::istringstream bom(std::string("\xEF\xBB\xBF") + testing::kRetailCsvHead);
    const auto recs = load_retail_csv(bom);
    CHECK(recs.size() == head_records().size());
    CHECK(recs[0].invoice_no == "536365");

    std::istringstream crlf("InvoiceNo,StockCode,Description,Quantity,InvoiceDate,UnitPrice,CustomerID,Country\r\n"
                            "1,A,B,2,1/1/2010 9:00,1.5,17850,France\r\n");
    const auto r = load_retail_csv(crlf);
    REQUIRE(r.size() == 1);
    CHECK(r[0].country == "France");

    std::istringstream bad("InvoiceNo,StockCode,Description,Quantity,InvoiceDate,UnitPrice,CustomerID,Country\n1,2,3\n");
    CHECK_THROWS_AS(load_retail_csv(bad), DataError);
    std::istringstream empty("");
    CHECK_THROWS_AS(load_retail_csv(empty), DataError);
    CHECK_THROWS_AS(load_retail_csv(std::string("/nonexistent/retail.csv")), DataError);
  }

  TEST_CASE("one invoice of three rows gives 24 labelled tokens") {
    std::istringstream is("InvoiceNo,StockCode,Description,Quantity,InvoiceDate,UnitPrice,CustomerID,Country\n"
                          "9,A1,RED MUG,1,1/2/2011 10:00,2,12346,Spain\n"
                          "9,B2,BLUE CUP,3,1/2/2011 10:00,4.25,12346,Spain\n"
                          "9,C3,\"LAMP, SMALL\",2,1/2/2011 10:00,7.5,12346,Spain\n");
    const auto docs = synthesize_messages(load_retail_csv(is), 0);
    REQUIRE(docs.size() == 1);
    CHECK(docs[0].token_count() == 24);
    CHECK(docs[0].lines[2] == "9 C3 LAMP,_SMALL 2 1/2/2011_10:00 7.5 12346 Spain");
    for (const auto& line : docs[0].labels) {
      REQUIRE(line.size() == 8);
      for (std::size_t c = 0; c < 8; ++c) CHECK(line[c] == kRetailColumns[c]);
    }
  }

  TEST_CASE("invoices are grouped in order of first appearance") {
    const auto docs = synthesize_messages(head_records(), 0);
    REQUIRE(!docs.empty());
    CHECK(docs[0].id == "536365");
    CHECK(synthesize_messages(head_records(), 1).size() == 1);
    const auto fx = fixture_docs(40);
    CHECK(fx.size() == 40);
    std::set<std::string> ids;
    for (const auto& d : fx) {
      ids.insert(d.id);
      CHECK(d.labels.size() == d.lines.size());
      for (std::size_t l = 0; l < d.lines.size(); ++l) CHECK(words(d.lines[l]).size() == d.labels[l].size());
    }
    CHECK(ids.size() == 40);
  }

  TEST_CASE("zero disruption is the identity") {
    const auto docs = fixture_docs(5);
    const auto out = disrupt(docs[0], DisruptionSpec{0.0, 0.0, 7});
    CHECK(out.doc.lines == docs[0].lines);
    CHECK(out.doc.labels == docs[0].labels);
  }

  TEST_CASE("deletion rate and ground truth of survivors") {
    const auto docs = fixture_docs(200);
    std::size_t before = 0, after = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto out = disrupt(docs[d], DisruptionSpec{0.5, 0.0, derive_seed(3, d)});
      before += docs[d].token_count();
      after += out.doc.token_count();
      for (std::size_t l = 0; l < out.doc.lines.size(); ++l) {
        const auto w = words(out.doc.lines[l]);
        REQUIRE(w.size() == out.origin[l].size());
        for (std::size_t i = 0; i < w.size(); ++i) {
          const auto [ol, oi] = out.origin[l][i];
          CHECK(w[i] == words(docs[d].lines[ol])[oi]);
          CHECK(out.doc.labels[l][i] == docs[d].labels[ol][oi]);
        }
      }
    }
    const double kept = static_cast<double>(after) / static_cast<double>(before);
    CHECK(kept == doctest::Approx(0.5).epsilon(0.02));
  }

  TEST_CASE("disruption replays the documented draw sequence") {
    const auto docs = fixture_docs(3);
    const DisruptionSpec spec{0.3, 0.2, 99};
    const auto out = disrupt(docs[1], spec);

    Rng rng(spec.seed);
    const CharCodec codec;
    std::u32string alphabet;
    for (char32_t c : codec.alphabet()) {
      if (c != U' ') alphabet += c;
    }
    std::vector<std::string> expect;
    for (const auto& line : docs[1].lines) {
      std::vector<std::string> kept;
      for (const auto& w : words(line)) {
        if (!rng.bernoulli(spec.del_pct)) kept.push_back(w);
      }
      for (auto& w : kept) {
        for (auto& c : w) {
          if (rng.bernoulli(spec.cr_pct)) c = static_cast<char>(alphabet[rng.below(alphabet.size())]);
        }
      }
      std::string joined;
      for (const auto& w : kept) joined += (joined.empty() ? "" : " ") + w;
      if (!joined.empty()) expect.push_back(joined);
    }
    CHECK(out.doc.lines == expect);
  }

  TEST_CASE("character replacement keeps token lengths and hits the rate") {
    const auto docs = fixture_docs(100);
    std::size_t chars = 0, changed = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto out = disrupt(docs[d], DisruptionSpec{0.0, 0.5, d});
      REQUIRE(out.doc.lines.size() == docs[d].lines.size());
      for (std::size_t l = 0; l < docs[d].lines.size(); ++l) {
        const auto a = words(docs[d].lines[l]);
        const auto b = words(out.doc.lines[l]);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
          REQUIRE(a[i].size() == b[i].size());
          for (std::size_t j = 0; j < a[i].size(); ++j) {
            ++chars;
            changed += a[i][j] != b[i][j];
          }
        }
        CHECK(out.doc.labels[l] == docs[d].labels[l]);
      }
    }
    // A replacement may redraw the original character (1 in 76).
    CHECK(static_cast<double>(changed) / static_cast<double>(chars) == doctest::Approx(0.5 * 75.0 / 76.0).epsilon(0.03));
  }

  TEST_CASE("same seed gives byte-identical corpora") {
    const auto docs = fixture_docs(20);
    const DisruptionSpec spec{0.5, 0.5, 11};
    std::ostringstream a, b, c;
    write_corpus(a, disrupt_corpus(docs, spec));
    write_corpus(b, disrupt_corpus(docs, spec));
    write_corpus(c, disrupt_corpus(docs, DisruptionSpec{0.5, 0.5, 12}));
    CHECK(a.str() == b.str());
    CHECK(a.str() != c.str());
  }

  TEST_CASE("invalid disruption fractions") {
    const auto docs = fixture_docs(1);
    CHECK_THROWS_AS(disrupt(docs[0], DisruptionSpec{1.0, 0.0, 0}), InvalidArgument);
    CHECK_THROWS_AS(disrupt(docs[0], DisruptionSpec{0.0, -0.1, 0}), InvalidArgument);
  }

  TEST_CASE("label table round trip and lookup errors") {
    const auto docs = fixture_docs(4);
    const LabelTable t(docs);
    std::size_t total = 0;
    for (const auto& d : docs) total += d.token_count();
    CHECK(t.size() == total);
    std::stringstream ss;
    t.write(ss);
    const auto back = LabelTable::read(ss);
    CHECK(back.size() == t.size());
    CHECK(back.lookup(2, 1, 3) == docs[2].labels[1][3]);
    CHECK(ground_truth_lookup(back, 0, 0, 7) == "Country");
    CHECK_FALSE(back.contains(0, 0, 8));
    CHECK_THROWS_AS(back.lookup(0, 0, 8), InvalidArgument);
    std::istringstream bad("0\t0\tx\tCountry\n");
    CHECK_THROWS_AS(LabelTable::read(bad), DataError);
  }

  TEST_CASE("corpus files separate documents by blank lines") {
    const auto docs = fixture_docs(6);
    std::stringstream ss;
    write_corpus(ss, docs);
    const auto texts = read_corpus(ss);
    REQUIRE(texts.size() == docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) CHECK(texts[i] == docs[i].text());
  }
}

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace sc2t {

// Column labels of the Online Retail table, in file order.
inline constexpr std::array<std::string_view, 8> kRetailColumns = {
    "InvoiceNo", "StockCode", "Description", "Quantity", "InvoiceDate", "UnitPrice", "CustomerID", "Country"};

struct RetailRecord {
  std::string invoice_no;
  std::string stock_code;
  std::string description;
  std::string quantity;
  std::string invoice_date;
  std::string unit_price;
  std::string customer_id;
  std::string country;

  std::array<const std::string*, 8> fields() const {
    return {&invoice_no, &stock_code, &description, &quantity, &invoice_date, &unit_price, &customer_id, &country};
  }
};

// One comma-separated record with RFC 4180 quoting.
std::vector<std::string> parse_csv_line(std::string_view line);

// Trims, joins internal whitespace with '_' and fills a missing CustomerID with "00000".
RetailRecord normalize_record(const std::vector<std::string>& fields);

std::vector<RetailRecord> load_retail_csv(std::istream& is);
std::vector<RetailRecord> load_retail_csv(const std::string& path);

// A plain-text message with the ground-truth label of every token.
struct LabeledDocument {
  std::string id;
  std::vector<std::string> lines;
  std::vector<std::vector<std::string>> labels;  // per line, per token

  std::string text() const;
  std::size_t token_count() const;
};

// One document per InvoiceNo (first n_invoices in order of first appearance;
// 0 means all), one line per record with fields joined by single spaces.
// Empty fields contribute no token.
std::vector<LabeledDocument> synthesize_messages(const std::vector<RetailRecord>& records, std::size_t n_invoices);

struct DisruptionSpec {
  double del_pct = 0.0;
  double cr_pct = 0.0;
  std::uint64_t seed = 0;
  void validate() const;
};

struct DisruptedDocument {
  LabeledDocument doc;
  // Original (line, token index) of every surviving token, parallel to doc.labels.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> origin;
};

// Drops each token with probability del_pct (lines re-joined with single
// spaces; lines left empty are removed), then replaces each surviving
// character with probability cr_pct by a uniform non-space alphabet character.
DisruptedDocument disrupt(const LabeledDocument& doc, const DisruptionSpec& spec);

// Corpus-level disruption with per-document seeds derived from spec.seed.
std::vector<LabeledDocument> disrupt_corpus(const std::vector<LabeledDocument>& docs, const DisruptionSpec& spec);

// Token labels keyed by (doc, line, token index).
class LabelTable {
 public:
  LabelTable() = default;
  explicit LabelTable(const std::vector<LabeledDocument>& docs);

  void add(std::size_t doc, std::size_t line, std::size_t idx, std::string label);
  const std::string& lookup(std::size_t doc, std::size_t line, std::size_t idx) const;
  bool contains(std::size_t doc, std::size_t line, std::size_t idx) const;
  std::size_t size() const { return labels_.size(); }

  // Tab-separated rows: doc_id, line, token_idx, label.
  void write(std::ostream& os) const;
  static LabelTable read(std::istream& is);

 private:
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string> labels_;
};

inline const std::string& ground_truth_lookup(const LabelTable& table, std::size_t doc, std::size_t line,
                                              std::size_t idx) {
  return table.lookup(doc, line, idx);
}

// Corpus file: documents separated by one blank line.
void write_corpus(std::ostream& os, const std::vector<LabeledDocument>& docs);
std::vector<std::string> read_corpus(std::istream& is);

}  // namespace sc2t

#include "sc2t/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "sc2t/error.hpp"
#include "sc2t/rng.hpp"
#include "sc2t/text_grid.hpp"

namespace sc2t {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

std::string join_words(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += '_';
    pending = false;
    out += c;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_line(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

const std::u32string& replacement_alphabet() {
  static const std::u32string chars = [] {
    const CharCodec codec;
    std::u32string a;
    for (char32_t c : codec.alphabet()) {
      if (c != U' ') a += c;
    }
    return a;
  }();
  return chars;
}

}  // namespace

std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw DataError("unterminated quoted CSV field");
  fields.push_back(std::move(cur));
  return fields;
}

RetailRecord normalize_record(const std::vector<std::string>& fields) {
  if (fields.size() != kRetailColumns.size()) {
    throw DataError("expected " + std::to_string(kRetailColumns.size()) + " columns, got " +
                    std::to_string(fields.size()));
  }
  RetailRecord r;
  r.invoice_no = join_words(fields[0]);
  r.stock_code = join_words(fields[1]);
  r.description = join_words(fields[2]);
  r.quantity = join_words(fields[3]);
  r.invoice_date = join_words(fields[4]);
  r.unit_price = join_words(fields[5]);
  r.customer_id = join_words(fields[6]);
  r.country = join_words(fields[7]);
  if (r.customer_id.empty()) r.customer_id = "00000";
  return r;
}

std::vector<RetailRecord> load_retail_csv(std::istream& is) {
  std::vector<RetailRecord> out;
  std::string line, pending;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (header && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    // A quoted field may contain a newline; keep reading until the quotes balance.
    pending += line;
    std::size_t quotes = 0;
    for (char c : pending) quotes += c == '"';
    if (quotes % 2 == 1) {
      pending += '\n';
      continue;
    }
    std::vector<std::string> fields;
    try {
      fields = parse_csv_line(pending);
    } catch (const DataError& e) {
      throw DataError("CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    pending.clear();
    if (fields.size() == 1 && fields[0].find_first_not_of(" \t\r") == std::string::npos) continue;
    if (fields.size() != kRetailColumns.size()) {
      throw DataError("CSV line " + std::to_string(line_no) + ": expected 8 columns, got " +
                      std::to_string(fields.size()));
    }
    if (header) {
      header = false;
      continue;
    }
    out.push_back(normalize_record(fields));
  }
  if (!pending.empty()) throw DataError("CSV ends inside a quoted field");
  if (header) throw DataError("CSV has no header row");
  return out;
}

std::vector<RetailRecord> load_retail_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  return load_retail_csv(is);
}

std::string LabeledDocument::text() const {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

std::size_t LabeledDocument::token_count() const {
  std::size_t n = 0;
  for (const auto& l : labels) n += l.size();
  return n;
}

std::vector<LabeledDocument> synthesize_messages(const std::vector<RetailRecord>& records, std::size_t n_invoices) {
  std::vector<LabeledDocument> docs;
  std::unordered_map<std::string, std::size_t> doc_of;
  for (const auto& r : records) {
    auto it = doc_of.find(r.invoice_no);
    if (it == doc_of.end()) {
      if (n_invoices && docs.size() >= n_invoices) continue;
      it = doc_of.emplace(r.invoice_no, docs.size()).first;
      docs.push_back(LabeledDocument{r.invoice_no, {}, {}});
    }
    LabeledDocument& d = docs[it->second];
    std::vector<std::string> tokens, labels;
    const auto fields = r.fields();
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c]->empty()) continue;
      tokens.push_back(*fields[c]);
      labels.emplace_back(kRetailColumns[c]);
    }
    d.lines.push_back(join_line(tokens));
    d.labels.push_back(std::move(labels));
  }
  return docs;
}

void DisruptionSpec::validate() const {
  if (!(del_pct >= 0.0 && del_pct < 1.0)) throw InvalidArgument("deletion fraction must be in [0, 1)");
  if (!(cr_pct >= 0.0 && cr_pct < 1.0)) throw InvalidArgument("character replacement fraction must be in [0, 1)");
}

DisruptedDocument disrupt(const LabeledDocument& doc, const DisruptionSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto& alphabet = replacement_alphabet();
  DisruptedDocument out;
  out.doc.id = doc.id;
  for (std::size_t l = 0; l < doc.lines.size(); ++l) {
    const auto tokens = split_words(doc.lines[l]);
    if (l < doc.labels.size() && tokens.size() != doc.labels[l].size()) {
      throw DataError("document " + doc.id + " line " + std::to_string(l) + " has " + std::to_string(tokens.size()) +
                      " tokens but " + std::to_string(doc.labels[l].size()) + " labels");
    }
    std::vector<std::string> kept, kept_labels;
    std::vector<std::pair<std::size_t, std::size_t>> origin;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (spec.del_pct > 0.0 && rng.bernoulli(spec.del_pct)) continue;
      kept.push_back(tokens[i]);
      kept_labels.push_back(l < doc.labels.size() ? doc.labels[l][i] : std::string());
      origin.emplace_back(l, i);
    }
    if (spec.cr_pct > 0.0) {
      for (auto& t : kept) {
        std::u32string cps = utf8_decode(t);
        for (auto& c : cps) {
          if (rng.bernoulli(spec.cr_pct)) c = alphabet[rng.below(alphabet.size())];
        }
        t = utf8_encode(cps);
      }
    }
    if (kept.empty()) continue;
    out.doc.lines.push_back(join_line(kept));
    out.doc.labels.push_back(std::move(kept_labels));
    out.origin.push_back(std::move(origin));
  }
  return out;
}

std::vector<LabeledDocument> disrupt_corpus(const std::vector<LabeledDocument>& docs, const DisruptionSpec& spec) {
  spec.validate();
  std::vector<LabeledDocument> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    DisruptionSpec s = spec;
    s.seed = derive_seed(spec.seed, i);
    out.push_back(disrupt(docs[i], s).doc);
  }
  return out;
}

LabelTable::LabelTable(const std::vector<LabeledDocument>& docs) {
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (std::size_t l = 0; l < docs[d].labels.size(); ++l) {
      for (std::size_t i = 0; i < docs[d].labels[l].size(); ++i) add(d, l, i, docs[d].labels[l][i]);
    }
  }
}

void LabelTable::add(std::size_t doc, std::size_t line, std::size_t idx, std::string label) {
  labels_[{doc, line, idx}] = std::move(label);
}

const std::string& LabelTable::lookup(std::size_t doc, std::size_t line, std::size_t idx) const {
  auto it = labels_.find({doc, line, idx});
  if (it == labels_.end()) {
    throw InvalidArgument("no label for doc " + std::to_string(doc) + " line " + std::to_string(line) + " token " +
                          std::to_string(idx));
  }
  return it->second;
}

bool LabelTable::contains(std::size_t doc, std::size_t line, std::size_t idx) const {
  return labels_.count({doc, line, idx}) != 0;
}

void LabelTable::write(std::ostream& os) const {
  for (const auto& [key, label] : labels_) {
    os << std::get<0>(key) << '\t' << std::get<1>(key) << '\t' << std::get<2>(key) << '\t' << label << '\n';
  }
}

LabelTable LabelTable::read(std::istream& is) {
  LabelTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string doc, l, idx, label;
    if (!std::getline(row, doc, '\t') || !std::getline(row, l, '\t') || !std::getline(row, idx, '\t') ||
        !std::getline(row, label)) {
      throw DataError("label file line " + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    try {
      t.add(std::stoull(doc), std::stoull(l), std::stoull(idx), label);
    } catch (const std::logic_error&) {
      throw DataError("label file line " + std::to_string(line_no) + ": bad position");
    }
  }
  return t;
}

void write_corpus(std::ostream& os, const std::vector<LabeledDocument>& docs) {
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (d) os << '\n';
    for (const auto& l : docs[d].lines) os << l << '\n';
  }
}

std::vector<std::string> read_corpus(std::istream& is) {
  std::vector<std::string> docs;
  std::string line, cur;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (!cur.empty()) docs.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur += line;
    cur += '\n';
  }
  if (!cur.empty()) docs.push_back(std::move(cur));
  return docs;
}

}  // namespace sc2t

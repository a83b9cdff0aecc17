#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sc2t/dataset.hpp"

namespace sc2t::testing {

// The first rows of the public Online Retail CSV export, header included.
extern const char* const kRetailCsvHead;

struct RetailFixtureOptions {
  std::size_t invoices = 100;
  std::uint64_t seed = 2010;
  double mean_lines = 24.0;       // average records per invoice
  double missing_customer = 0.25;  // invoices without a CustomerID
  double cancellations = 0.02;     // "C"-prefixed invoices with negative quantities
};

// Synthetic CSV with the column formats and rough marginals of the Online
// Retail data (used when the real file is not available).
std::string make_retail_csv(const RetailFixtureOptions& opt);

// Path of a real Online Retail CSV from $SC2T_RETAIL_CSV, or empty.
std::string real_retail_csv_path();

// Line roles for documents framed by header and disclaimer paragraphs.
struct FramedCorpus {
  std::vector<LabeledDocument> docs;
  std::vector<std::vector<std::string>> line_roles;  // "header" / "table" / "disclaimer"
};

// Wraps every invoice in a greeting header and a legal disclaimer drawn from
// a few templates.
FramedCorpus frame_messages(const std::vector<LabeledDocument>& docs, std::uint64_t seed);

}  // namespace sc2t::testing

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sc2t/dataset.hpp"
#include "sc2t/model.hpp"

namespace sc2t::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Everything a subcommand can be configured with.
struct RunConfig {
  Sc2tConfig model;
  std::string csv;
  std::string corpus;  // corpus.txt
  std::string labels;  // labels.tsv
  std::string model_path;
  std::string message;
  std::string out;
  std::size_t invoices = 1000;
  std::optional<double> k;
  std::vector<std::size_t> nc_list = {8, 20, 100};
  std::size_t nc = 8;
  std::size_t runs = 20;
  DisruptionSpec disruption;
  std::size_t epochs = 10;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool lines = false;        // cluster: line embeddings instead of tokens
  bool detect_table = false;  // realign: keep only the largest line cluster
};

// Parses argv and runs one subcommand. Messages go to `out` / `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_disrupt(const RunConfig& cfg, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_embed(const RunConfig& cfg, std::ostream& out);
int cmd_cluster(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
// Lines longer than the reference are clipped, with a warning on `err`.
int cmd_realign(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Documents of a corpus file with the labels of a labels file (doc index,
// line, token). Tokens absent from the label table get an empty label.
std::vector<LabeledDocument> read_labeled_corpus(const std::string& corpus_path, const std::string& labels_path);

// Writes through a temporary sibling and renames, so a failure leaves no file.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace sc2t::cli

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sc2t/context_window.hpp"
#include "sc2t/dataset.hpp"
#include "sc2t/model.hpp"
#include "sc2t/nn/tensor.hpp"
#include "sc2t/realign.hpp"

namespace sc2t {

// Tokenized documents plus one sample per token, grid order within each document.
struct Corpus {
  std::vector<TokenGrid> grids;
  SampleSet samples;
};

Corpus build_corpus(const std::vector<std::string>& documents, const WindowConfig& window);
Corpus build_corpus(const std::vector<LabeledDocument>& documents, const WindowConfig& window);

// Ground-truth label of every sample. Throws DataError when one is missing.
std::vector<std::string> sample_labels(const SampleSet& samples, const LabelTable& labels);

// NoK embeddings, or the K-weighted variant when `k` is set.
nn::Tensor embed_corpus(Sc2tModel& model, const SampleSet& samples, std::optional<double> k, std::size_t threads = 1);

struct LineEmbeddings {
  nn::Tensor embeddings;                                // [lines, dim]
  std::vector<std::pair<std::size_t, std::size_t>> id;  // (doc, line) of each row
};

// Max-pooled embedding of every non-empty line.
LineEmbeddings line_embeddings(const SampleSet& samples, const nn::Tensor& token_embeddings);

// doc, line, token_idx, token, then one column per dimension.
void write_embeddings_tsv(std::ostream& os, const SampleSet& samples, const nn::Tensor& embeddings);

// doc_id, line_idx, token_idx, token_text, cluster_id, ground_truth_label.
void write_assignments_tsv(std::ostream& os, const SampleSet& samples, std::span<const std::uint32_t> assignment,
                           const std::vector<std::string>* labels);

// Embeds the tokens of one message and realigns its table: every non-empty
// line, or with `detect_table` the largest of three line clusters. Longer
// lines than the reference are clipped (listed in truncated_lines).
AlignmentResult realign_message(Sc2tModel& model, std::string_view text, std::optional<double> k, bool detect_table,
                                std::uint64_t seed, std::size_t threads = 1);

std::string format_train_report(const TrainReport& report);

}  // namespace sc2t

#include "sc2t/pipeline.hpp"

#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "sc2t/clustering.hpp"
#include "sc2t/error.hpp"

namespace sc2t {

Corpus build_corpus(const std::vector<std::string>& documents, const WindowConfig& window) {
  Corpus c{{}, SampleSet(window)};
  for (std::size_t d = 0; d < documents.size(); ++d) {
    c.grids.push_back(tokenize_document(documents[d]));
    c.samples.append(c.grids.back(), d);
  }
  return c;
}

Corpus build_corpus(const std::vector<LabeledDocument>& documents, const WindowConfig& window) {
  std::vector<std::string> texts;
  texts.reserve(documents.size());
  for (const auto& d : documents) texts.push_back(d.text());
  return build_corpus(texts, window);
}

std::vector<std::string> sample_labels(const SampleSet& samples, const LabelTable& labels) {
  std::vector<std::string> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = samples.position(i);
    if (!labels.contains(p.doc, p.line, p.idx)) {
      throw DataError("no label for doc " + std::to_string(p.doc) + " line " + std::to_string(p.line) + " token " +
                      std::to_string(p.idx));
    }
    out.push_back(labels.lookup(p.doc, p.line, p.idx));
  }
  return out;
}

nn::Tensor embed_corpus(Sc2tModel& model, const SampleSet& samples, std::optional<double> k, std::size_t threads) {
  if (!k) return model.embed(samples, threads);
  return embed_token_k(model.embed_parts(samples, threads), *k);
}

LineEmbeddings line_embeddings(const SampleSet& samples, const nn::Tensor& token_embeddings) {
  if (token_embeddings.rank() != 2 || token_embeddings.dim(0) != samples.size()) {
    throw InvalidArgument("need one embedding per sample");
  }
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = samples.position(i);
    rows[{p.doc, p.line}].push_back(i);
  }
  const std::size_t dim = token_embeddings.dim(1);
  LineEmbeddings out{nn::Tensor({rows.size(), dim}), {}};
  std::size_t r = 0;
  for (const auto& [key, members] : rows) {
    const auto e = embed_line(token_embeddings, members);
    std::copy(e.begin(), e.end(), out.embeddings.data().data() + r * dim);
    out.id.push_back(key);
    ++r;
  }
  return out;
}

void write_embeddings_tsv(std::ostream& os, const SampleSet& samples, const nn::Tensor& embeddings) {
  if (embeddings.dim(0) != samples.size()) throw InvalidArgument("need one embedding per sample");
  const std::size_t dim = embeddings.dim(1);
  char buf[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = samples.position(i);
    os << p.doc << '\t' << p.line << '\t' << p.idx << '\t' << samples.target_text(i);
    for (std::size_t k = 0; k < dim; ++k) {
      std::snprintf(buf, sizeof buf, "\t%.9g", embeddings.at(i, k));
      os << buf;
    }
    os << '\n';
  }
}

void write_assignments_tsv(std::ostream& os, const SampleSet& samples, std::span<const std::uint32_t> assignment,
                           const std::vector<std::string>* labels) {
  if (assignment.size() != samples.size()) throw InvalidArgument("need one cluster id per sample");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = samples.position(i);
    os << p.doc << '\t' << p.line << '\t' << p.idx << '\t' << samples.target_text(i) << '\t' << assignment[i] << '\t'
       << (labels ? (*labels)[i] : std::string()) << '\n';
  }
}

AlignmentResult realign_message(Sc2tModel& model, std::string_view text, std::optional<double> k, bool detect_table,
                                std::uint64_t seed, std::size_t threads) {
  const TokenGrid grid = tokenize_document(text);
  SampleSet samples(model.config().window());
  samples.append(grid, 0);
  if (samples.empty()) throw DataError("message has no tokens");
  const nn::Tensor emb = embed_corpus(model, samples, k, threads);

  std::vector<std::size_t> table_lines;
  for (std::size_t l = 0; l < grid.lines.size(); ++l) {
    if (!grid.lines[l].empty()) table_lines.push_back(l);
  }
  if (detect_table && table_lines.size() >= 3) {
    const LineEmbeddings le = line_embeddings(samples, emb);
    const LineClustering lc = cluster_lines(le.embeddings, seed, 3);
    table_lines.clear();
    for (std::size_t i = 0; i < le.id.size(); ++i) {
      if (lc.clusters.assignment[i] == lc.table_cluster) table_lines.push_back(le.id[i].second);
    }
  }
  return realign_table(grid, emb, table_lines, true);
}

std::string format_train_report(const TrainReport& report) {
  std::ostringstream os;
  char buf[64];
  os << "samples=" << report.samples << '\n';
  os << "epochs=" << report.epoch_loss.size() << '\n';
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.10f", report.epoch_loss[e]);
    os << "epoch_" << e + 1 << "_loss=" << buf << '\n';
  }
  if (!report.epoch_loss.empty()) {
    std::snprintf(buf, sizeof buf, "%.10f", report.epoch_loss.back());
    os << "final_loss=" << buf << '\n';
  }
  return os.str();
}

}  // namespace sc2t

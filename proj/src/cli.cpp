#include "sc2t/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sc2t/clustering.hpp"
#include "sc2t/error.hpp"
#include "sc2t/pipeline.hpp"
#include "sc2t/realign.hpp"

namespace sc2t::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> read_documents(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  auto docs = read_corpus(is);
  if (docs.empty()) throw DataError(path + " holds no documents");
  return docs;
}

LabelTable read_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return LabelTable::read(is);
}

std::string join(const fs::path& dir, const char* name) { return (dir / name).string(); }

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw InvalidArgument("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
}

// Writes to a file when `path` is set, otherwise to `out`.
void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
  } else {
    write_file_atomic(path, content);
  }
}

void write_labeled(const std::string& dir, const std::vector<LabeledDocument>& docs) {
  std::ostringstream corpus, labels;
  write_corpus(corpus, docs);
  LabelTable(docs).write(labels);
  ensure_dir(dir);
  const std::string corpus_path = join(dir, "corpus.txt"), labels_path = join(dir, "labels.tsv");
  write_file_atomic(labels_path + ".part", labels.str());
  try {
    write_file_atomic(corpus_path, corpus.str());
  } catch (...) {
    std::remove((labels_path + ".part").c_str());
    throw;
  }
  fs::rename(labels_path + ".part", labels_path);
}

Sc2tModel load_model(const std::string& path) {
  if (path.empty()) throw InvalidArgument("--model is required");
  return Sc2tModel::load_file(path);
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path);
    os << content;
    os.flush();
    if (!os) {
      std::remove(tmp.c_str());
      throw DataError("cannot write " + path);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw DataError("cannot write " + path + ": " + ec.message());
  }
}

std::vector<LabeledDocument> read_labeled_corpus(const std::string& corpus_path, const std::string& labels_path) {
  const auto texts = read_documents(corpus_path);
  const LabelTable table = labels_path.empty() ? LabelTable() : read_labels(labels_path);
  std::vector<LabeledDocument> docs;
  for (std::size_t d = 0; d < texts.size(); ++d) {
    LabeledDocument doc;
    doc.id = std::to_string(d);
    std::istringstream is(texts[d]);
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::vector<std::string> labels;
      std::string tok;
      for (std::size_t i = 0; ls >> tok; ++i) {
        labels.push_back(table.contains(d, doc.lines.size(), i) ? table.lookup(d, doc.lines.size(), i) : "");
      }
      doc.lines.push_back(line);
      doc.labels.push_back(std::move(labels));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  if (cfg.csv.empty()) throw InvalidArgument("--csv is required");
  if (!fs::exists(cfg.csv)) throw DataError("no such file: " + cfg.csv);
  const auto records = load_retail_csv(cfg.csv);
  const auto docs = synthesize_messages(records, cfg.invoices);
  write_labeled(cfg.out, docs);
  std::size_t lines = 0, tokens = 0;
  for (const auto& d : docs) {
    lines += d.lines.size();
    tokens += d.token_count();
  }
  out << "documents " << docs.size() << "\nlines " << lines << "\ntokens " << tokens << '\n';
  return kOk;
}

int cmd_disrupt(const RunConfig& cfg, std::ostream& out) {
  cfg.disruption.validate();
  const auto docs = read_labeled_corpus(cfg.corpus, cfg.labels);
  DisruptionSpec spec = cfg.disruption;
  spec.seed = cfg.seed;
  const auto disrupted = disrupt_corpus(docs, spec);
  write_labeled(cfg.out, disrupted);
  std::size_t before = 0, after = 0;
  for (const auto& d : docs) before += d.token_count();
  for (const auto& d : disrupted) after += d.token_count();
  out << "tokens_before " << before << "\ntokens_after " << after << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  Sc2tConfig mc = cfg.model;
  mc.seed = derive_seed(cfg.seed, 1);
  mc.validate();
  const Corpus corpus = build_corpus(read_documents(cfg.corpus), mc.window());
  ensure_dir(cfg.out);

  Sc2tModel model(mc);
  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.batch = cfg.batch;
  opt.lr = cfg.lr;
  opt.seed = derive_seed(cfg.seed, 2);
  opt.on_epoch = [&](std::size_t e, double loss) { out << "epoch " << e + 1 << " loss " << fixed(loss) << std::endl; };
  const TrainReport report = model.train(corpus.samples, opt);

  std::ostringstream bin;
  model.save(bin);
  write_file_atomic(join(cfg.out, "model.sc2t"), bin.str());
  write_file_atomic(join(cfg.out, "train_report.txt"), format_train_report(report));
  out << "wall_seconds " << fixed(report.wall_seconds, 1) << '\n';
  return kOk;
}

int cmd_embed(const RunConfig& cfg, std::ostream& out) {
  Sc2tModel model = load_model(cfg.model_path);
  const Corpus corpus = build_corpus(read_documents(cfg.corpus), model.config().window());
  const nn::Tensor emb = embed_corpus(model, corpus.samples, cfg.k, cfg.threads);
  std::ostringstream os;
  write_embeddings_tsv(os, corpus.samples, emb);
  emit(cfg.out, os.str(), out);
  return kOk;
}

int cmd_cluster(const RunConfig& cfg, std::ostream& out) {
  Sc2tModel model = load_model(cfg.model_path);
  const Corpus corpus = build_corpus(read_documents(cfg.corpus), model.config().window());
  const nn::Tensor emb = embed_corpus(model, corpus.samples, cfg.k, cfg.threads);
  KMeansOptions km;
  km.threads = cfg.threads;
  std::ostringstream os;
  if (cfg.lines) {
    const LineEmbeddings le = line_embeddings(corpus.samples, emb);
    const LineClustering lc = cluster_lines(le.embeddings, cfg.seed, cfg.nc, km);
    os << "doc_id\tline_idx\tcluster_id\ttable\n";
    for (std::size_t i = 0; i < le.id.size(); ++i) {
      const auto c = lc.clusters.assignment[i];
      os << le.id[i].first << '\t' << le.id[i].second << '\t' << c << '\t' << (c == lc.table_cluster ? 1 : 0) << '\n';
    }
  } else {
    const ClusterAssignment ca = kmeans_pp(emb, cfg.nc, cfg.seed, km);
    std::vector<std::string> labels;
    if (!cfg.labels.empty()) labels = sample_labels(corpus.samples, read_labels(cfg.labels));
    write_assignments_tsv(os, corpus.samples, ca.assignment, cfg.labels.empty() ? nullptr : &labels);
  }
  emit(cfg.out, os.str(), out);
  return kOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  if (cfg.labels.empty()) throw InvalidArgument("--labels is required");
  Sc2tModel model = load_model(cfg.model_path);
  const Corpus corpus = build_corpus(read_documents(cfg.corpus), model.config().window());
  const auto labels = sample_labels(corpus.samples, read_labels(cfg.labels));
  const nn::Tensor emb = embed_corpus(model, corpus.samples, cfg.k, cfg.threads);
  KMeansOptions km;
  km.threads = cfg.threads;
  const auto rows = evaluate_protocol(emb, labels, cfg.nc_list, cfg.runs, cfg.seed, km);

  const std::string mode = cfg.k ? "K=" + fixed(*cfg.k, 2) : std::string("NoK");
  std::ostringstream text, tsv;
  text << "homogeneity (" << mode << ", " << corpus.samples.size() << " tokens, " << cfg.runs << " runs)\n";
  tsv << "nc\tmean_h\tstddev_h\truns\n";
  for (const auto& r : rows) {
    text << "  nc=" << r.nc << "  h=" << fixed(100.0 * r.mean_h, 1) << "  sd=" << fixed(100.0 * r.stddev_h, 1) << '\n';
    tsv << r.nc << '\t' << fixed(r.mean_h) << '\t' << fixed(r.stddev_h) << '\t' << r.runs << '\n';
  }
  out << text.str();
  if (!cfg.out.empty()) {
    ensure_dir(cfg.out);
    write_file_atomic(join(cfg.out, "homogeneity.txt"), text.str());
    write_file_atomic(join(cfg.out, "homogeneity.tsv"), tsv.str());
  }
  return kOk;
}

int cmd_realign(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.message.empty()) throw InvalidArgument("--message is required");
  const std::string text = read_text(cfg.message);
  Sc2tModel model = load_model(cfg.model_path);
  const AlignmentResult res = realign_message(model, text, cfg.k, cfg.detect_table, cfg.seed, cfg.threads);
  for (std::size_t l : res.truncated_lines) {
    err << "warning: line " << l << " is longer than the reference line; extra tokens dropped\n";
  }
  emit(cfg.out, res.text, out);
  return kOk;
}

namespace {

void add_model_flags(CLI::App* app, Sc2tConfig& m) {
  app->add_option("--s-e", m.s_e, "context embedding size")->capture_default_str();
  app->add_option("--ch-e", m.ch_e, "character embedding size")->capture_default_str();
  app->add_option("--l-t", m.l_t, "characters per token")->capture_default_str();
  app->add_option("--h-w", m.h_w, "horizontal window (odd)")->capture_default_str();
  app->add_option("--v-w", m.v_w, "vertical window (odd)")->capture_default_str();
  app->add_option("--n-f", m.n_f, "convolution filters")->capture_default_str();
  app->add_option("--filter-width", m.filter_width)->capture_default_str();
  app->add_option("--char-fc", m.char_fc_units, "per-character FC width")->capture_default_str();
  app->add_option("--dropout", m.dropout_inner)->capture_default_str();
  app->add_option("--dropout-merge", m.dropout_merge)->capture_default_str();
}

void add_k(CLI::App* app, RunConfig& cfg) {
  app->add_option("--k", cfg.k, "K coefficient in [0,1]; omit for NoK embeddings");
}

CLI::App* subcommand(CLI::App& app, const char* name, const char* help, RunConfig& cfg, bool seeded) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--threads", cfg.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  auto* seed = sub->add_option("--seed", cfg.seed, "master seed");
  if (seeded) seed->required();
  return sub;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Self-supervised token embeddings for plain-text tables", "sc2t"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI/TOML file with one [subcommand] section; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);

  auto* synth = subcommand(app, "synth", "build a labelled corpus from the Online Retail CSV", cfg, false);
  synth->add_option("--csv", cfg.csv)->required();
  synth->add_option("--invoices", cfg.invoices, "invoices to keep, 0 for all")->capture_default_str();
  synth->add_option("--out", cfg.out, "output directory")->required();

  auto* disrupt = subcommand(app, "disrupt", "delete tokens and replace characters", cfg, true);
  disrupt->add_option("--corpus", cfg.corpus)->required();
  disrupt->add_option("--labels", cfg.labels)->required();
  disrupt->add_option("--del", cfg.disruption.del_pct, "token deletion probability")->capture_default_str();
  disrupt->add_option("--cr", cfg.disruption.cr_pct, "character replacement probability")->capture_default_str();
  disrupt->add_option("--out", cfg.out, "output directory")->required();

  auto* train = subcommand(app, "train", "train the reconstruction model", cfg, true);
  train->add_option("--corpus", cfg.corpus)->required();
  train->add_option("--out", cfg.out, "output directory")->required();
  train->add_option("--epochs", cfg.epochs)->capture_default_str();
  train->add_option("--batch", cfg.batch)->capture_default_str();
  train->add_option("--lr", cfg.lr)->capture_default_str();
  add_model_flags(train, cfg.model);

  auto* embed = subcommand(app, "embed", "write token embeddings as TSV", cfg, false);
  embed->add_option("--corpus", cfg.corpus)->required();
  embed->add_option("--model", cfg.model_path)->required();
  embed->add_option("--out", cfg.out, "output file (default stdout)");
  add_k(embed, cfg);

  auto* cluster = subcommand(app, "cluster", "k-means++ over token or line embeddings", cfg, true);
  cluster->add_option("--corpus", cfg.corpus)->required();
  cluster->add_option("--model", cfg.model_path)->required();
  cluster->add_option("--labels", cfg.labels, "ground truth to include in the output");
  auto* nc = cluster->add_option("--nc", cfg.nc, "number of clusters (default 8, or 3 with --lines)");
  cluster->add_flag("--lines", cfg.lines, "cluster max-pooled line embeddings");
  cluster->add_option("--out", cfg.out, "output file (default stdout)");
  add_k(cluster, cfg);

  auto* eval = subcommand(app, "eval", "homogeneity of k-means++ clusterings", cfg, true);
  eval->add_option("--corpus", cfg.corpus)->required();
  eval->add_option("--labels", cfg.labels)->required();
  eval->add_option("--model", cfg.model_path)->required();
  eval->add_option("--nc", cfg.nc_list, "cluster counts")->delimiter(',')->capture_default_str();
  eval->add_option("--runs", cfg.runs, "k-means seeds per cluster count")->capture_default_str();
  eval->add_option("--out", cfg.out, "output directory");
  add_k(eval, cfg);

  auto* realign = subcommand(app, "realign", "realign the columns of a table message", cfg, false);
  realign->add_option("--message", cfg.message)->required();
  realign->add_option("--model", cfg.model_path)->required();
  realign->add_flag("--detect-table", cfg.detect_table, "keep only the largest of three line clusters");
  realign->add_option("--out", cfg.out, "output file (default stdout)");
  add_k(realign, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (cluster->parsed() && cfg.lines && nc->count() == 0) cfg.nc = 3;

  try {
    if (cfg.k && !(*cfg.k >= 0.0 && *cfg.k <= 1.0)) throw InvalidArgument("--k must lie in [0, 1]");
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (disrupt->parsed()) return cmd_disrupt(cfg, out);
    if (train->parsed()) return cmd_train(cfg, out);
    if (embed->parsed()) return cmd_embed(cfg, out);
    if (cluster->parsed()) return cmd_cluster(cfg, out);
    if (eval->parsed()) return cmd_eval(cfg, out);
    if (realign->parsed()) return cmd_realign(cfg, out, err);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace sc2t::cli

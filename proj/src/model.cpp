#include "sc2t/model.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "sc2t/error.hpp"
#include "sc2t/nn/loss.hpp"
#include "sc2t/nn/serialize.hpp"
#include "sc2t/parallel.hpp"

namespace sc2t {

using nn::LayerSpec;
using nn::Mode;
using nn::Tensor;

namespace {

constexpr char kMagic[4] = {'S', 'C', '2', 'T'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kEmbedChunk = 256;

// Batch activations are tens of MB; keeping them on the heap instead of
// fresh mmap pages avoids page-fault storms on every step.
void keep_large_blocks() {
#ifdef __GLIBC__
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)done;
#endif
}

std::vector<LayerSpec> conv_stack(const Sc2tConfig& cfg) {
  const double p = cfg.dropout_inner;
  return {
      LayerSpec::dense(cfg.char_fc_units), LayerSpec::batch_norm(), LayerSpec::relu(), LayerSpec::dropout(p),
      LayerSpec::conv1d(cfg.n_f, cfg.filter_width), LayerSpec::batch_norm(), LayerSpec::relu(), LayerSpec::dropout(p),
      LayerSpec::conv1d(cfg.n_f, cfg.filter_width), LayerSpec::batch_norm(), LayerSpec::relu(), LayerSpec::dropout(p),
  };
}

std::vector<LayerSpec> chnn_layers(const Sc2tConfig& cfg) {
  auto layers = conv_stack(cfg);
  layers.push_back(LayerSpec::max_pool());
  layers.push_back(LayerSpec::dense(cfg.ch_e));
  return layers;
}

std::vector<LayerSpec> context_layers(const Sc2tConfig& cfg) {
  auto layers = conv_stack(cfg);
  layers.push_back(LayerSpec::flatten());
  return layers;
}

std::vector<LayerSpec> lnn_layers(const Sc2tConfig& cfg) {
  return {LayerSpec::dense(2 * cfg.s_e), LayerSpec::batch_norm(), LayerSpec::relu(),
          LayerSpec::dropout(cfg.dropout_inner), LayerSpec::dense(cfg.s_e)};
}

// Rows [0, a) from `left`, [a, a+b) from `right` per sample.
Tensor concat_columns(const Tensor& left, const Tensor& right) {
  const std::size_t n = left.dim(0), a = left.size() / std::max<std::size_t>(n, 1),
                    b = right.size() / std::max<std::size_t>(n, 1);
  Tensor out({n, a + b});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(left.data().data() + i * a, a, out.data().data() + i * (a + b));
    std::copy_n(right.data().data() + i * b, b, out.data().data() + i * (a + b) + a);
  }
  return out;
}

std::pair<Tensor, Tensor> split_columns(const Tensor& t, std::size_t a) {
  const std::size_t n = t.dim(0), total = t.dim(1), b = total - a;
  Tensor left({n, a}), right({n, b});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(t.data().data() + i * total, a, left.data().data() + i * a);
    std::copy_n(t.data().data() + i * total + a, b, right.data().data() + i * b);
  }
  return {std::move(left), std::move(right)};
}

struct ConfigField {
  const char* name;
  double value;
};

std::vector<ConfigField> config_fields(const Sc2tConfig& c) {
  return {{"s_e", static_cast<double>(c.s_e)},
          {"ch_e", static_cast<double>(c.ch_e)},
          {"l_t", static_cast<double>(c.l_t)},
          {"h_w", static_cast<double>(c.h_w)},
          {"v_w", static_cast<double>(c.v_w)},
          {"n_f", static_cast<double>(c.n_f)},
          {"filter_width", static_cast<double>(c.filter_width)},
          {"char_fc_units", static_cast<double>(c.char_fc_units)},
          {"dropout_inner", c.dropout_inner},
          {"dropout_merge", c.dropout_merge},
          {"seed", static_cast<double>(c.seed & ((std::uint64_t{1} << 53) - 1))}};
}

const Sc2tConfig& validated(const Sc2tConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

void Sc2tConfig::validate() const {
  if (s_e == 0 || ch_e == 0 || l_t == 0 || n_f == 0 || filter_width == 0 || char_fc_units == 0) {
    throw InvalidArgument("all model dimensions must be >= 1");
  }
  if (h_w < 3 || v_w < 3) throw InvalidArgument("h_w and v_w must be >= 3 so both context networks have input");
  window().validate();
  if (!(dropout_inner >= 0.0 && dropout_inner < 1.0) || !(dropout_merge >= 0.0 && dropout_merge < 1.0)) {
    throw InvalidArgument("dropout probabilities must be in [0, 1)");
  }
}

struct Sc2tModel::Forward {
  std::size_t batch = 0;
  std::vector<std::int32_t> unique_ids;  // -1 is the zero padding input
  std::vector<std::int32_t> slot_rows;   // batch * stride rows into unique_ids
  nn::Tape chnn, hnn, vnn, lnn, e_hidden, e_output;
  Tensor chars;
  Tensor embedding;
  Tensor scores;
};

Sc2tModel::Sc2tModel(const Sc2tConfig& cfg, CharCodec codec)
    : cfg_(validated(cfg)),
      codec_(std::move(codec)),
      chnn_({cfg.l_t, codec_.size()}),
      hnn_({cfg.h_w - 1, cfg.ch_e}),
      vnn_({cfg.v_w - 1, cfg.ch_e}),
      lnn_({(cfg.h_w - 1 + cfg.v_w - 1) * cfg.n_f}),
      e_hidden_({cfg.ch_e + cfg.s_e}),
      e_output_({cfg.ch_e + cfg.s_e}) {
  for (const auto& s : chnn_layers(cfg_)) chnn_.add(s);
  for (const auto& s : context_layers(cfg_)) hnn_.add(s);
  for (const auto& s : context_layers(cfg_)) vnn_.add(s);
  for (const auto& s : lnn_layers(cfg_)) lnn_.add(s);
  e_hidden_.add(LayerSpec::dropout(cfg_.dropout_merge))
      .add(LayerSpec::dense(cfg_.ch_e + cfg_.s_e))
      .add(LayerSpec::relu());
  e_output_.add(LayerSpec::dense(cfg_.l_t * codec_.size()));

  chnn_.initialize(derive_seed(cfg_.seed, 1));
  hnn_.initialize(derive_seed(cfg_.seed, 2));
  vnn_.initialize(derive_seed(cfg_.seed, 3));
  lnn_.initialize(derive_seed(cfg_.seed, 4));
  e_hidden_.initialize(derive_seed(cfg_.seed, 5));
  e_output_.initialize(derive_seed(cfg_.seed, 6));
}

std::vector<Tensor*> Sc2tModel::mutable_parameters() {
  std::vector<Tensor*> out;
  for (nn::Network* n : {&chnn_, &hnn_, &vnn_, &lnn_, &e_hidden_, &e_output_}) {
    for (Tensor* p : n->mutable_parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const Tensor*> Sc2tModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const nn::Network* n : {&chnn_, &hnn_, &vnn_, &lnn_, &e_hidden_, &e_output_}) {
    for (const Tensor* p : n->parameters()) out.push_back(p);
  }
  return out;
}

std::size_t Sc2tModel::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* p : parameters()) n += p->size();
  return n;
}

void Sc2tModel::touch() {
  for (nn::Network* n : {&chnn_, &hnn_, &vnn_, &lnn_, &e_hidden_, &e_output_}) n->touch();
}

void Sc2tModel::check_samples(const SampleSet& samples) const {
  const auto& w = samples.config();
  if (w.h_w != cfg_.h_w || w.v_w != cfg_.v_w || w.l_t != cfg_.l_t) {
    throw InvalidArgument("sample window (h_w=" + std::to_string(w.h_w) + ", v_w=" + std::to_string(w.v_w) +
                          ", l_t=" + std::to_string(w.l_t) + ") does not match the model");
  }
}

Tensor Sc2tModel::char_input(const SampleSet& samples, std::span<const std::int32_t> ids) const {
  const std::size_t d = codec_.size(), lt = cfg_.l_t;
  Tensor x({ids.size(), lt, d});
  std::vector<std::int32_t> rows(lt);
  for (std::size_t u = 0; u < ids.size(); ++u) {
    if (ids[u] < 0) continue;
    codec_.encode_indices(samples.vocab()[static_cast<std::size_t>(ids[u])], lt, rows.data());
    for (std::size_t r = 0; r < lt; ++r) x[(u * lt + r) * d + static_cast<std::size_t>(rows[r])] = 1.0;
  }
  return x;
}

Sc2tModel::Forward Sc2tModel::run_forward(const SampleSet& samples, std::span<const std::size_t> batch, Mode mode,
                                          std::uint64_t seed, bool need_scores, bool signatures) {
  check_samples(samples);
  if (batch.empty()) throw InvalidArgument("empty batch");
  Forward f;
  for (nn::Tape* t : {&f.chnn, &f.hnn, &f.vnn, &f.lnn, &f.e_hidden, &f.e_output}) t->record_signature = signatures;
  f.batch = batch.size();
  const std::size_t stride = samples.stride(), hs = samples.h_slots(), vs = samples.v_slots(), ce = cfg_.ch_e;

  // Each distinct token text (and the padding input) goes through ChNN once per batch.
  std::unordered_map<std::int32_t, std::int32_t> row_of;
  f.slot_rows.reserve(batch.size() * stride);
  for (std::size_t b : batch) {
    for (std::int32_t id : samples.slots(b)) {
      auto [it, inserted] = row_of.try_emplace(id, static_cast<std::int32_t>(f.unique_ids.size()));
      if (inserted) f.unique_ids.push_back(id);
      f.slot_rows.push_back(it->second);
    }
  }

  f.chars = chnn_.forward(char_input(samples, f.unique_ids), mode, derive_seed(seed, 1), f.chnn, false);

  const std::size_t n = batch.size();
  Tensor target({n, ce}), h({n, hs, ce}), v({n, vs, ce});
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t* rows = f.slot_rows.data() + i * stride;
    auto copy_row = [&](std::int32_t row, double* dst) {
      std::copy_n(f.chars.data().data() + static_cast<std::size_t>(row) * ce, ce, dst);
    };
    copy_row(rows[0], target.data().data() + i * ce);
    for (std::size_t s = 0; s < hs; ++s) copy_row(rows[1 + s], h.data().data() + (i * hs + s) * ce);
    for (std::size_t s = 0; s < vs; ++s) copy_row(rows[1 + hs + s], v.data().data() + (i * vs + s) * ce);
  }

  const Tensor h_out = hnn_.forward(h, mode, derive_seed(seed, 2), f.hnn);
  const Tensor v_out = vnn_.forward(v, mode, derive_seed(seed, 3), f.vnn);
  const Tensor context = lnn_.forward(concat_columns(h_out, v_out), mode, derive_seed(seed, 4), f.lnn);
  f.embedding = e_hidden_.forward(concat_columns(target, context), mode, derive_seed(seed, 5), f.e_hidden);
  if (need_scores) f.scores = e_output_.forward(f.embedding, mode, derive_seed(seed, 6), f.e_output);
  return f;
}

double Sc2tModel::loss(const SampleSet& samples, std::span<const std::size_t> batch, Mode mode, std::uint64_t seed,
                       std::vector<std::uint64_t>* signature) {
  Forward f = run_forward(samples, batch, mode, seed, true, signature != nullptr);
  std::vector<std::int32_t> targets(batch.size() * cfg_.l_t);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    codec_.encode_indices(samples.target_text(batch[i]), cfg_.l_t, targets.data() + i * cfg_.l_t);
  }
  if (signature) {
    signature->clear();
    for (const nn::Tape* t : {&f.chnn, &f.hnn, &f.vnn, &f.lnn, &f.e_hidden, &f.e_output}) {
      signature->insert(signature->end(), t->branch_signature.begin(), t->branch_signature.end());
    }
  }
  return nn::softmax_xent_indexed(f.scores, targets, cfg_.l_t, codec_.size()).loss;
}

BatchLoss Sc2tModel::loss_and_gradients(const SampleSet& samples, std::span<const std::size_t> batch, Mode mode,
                                        std::uint64_t seed, bool signature) {
  Forward f = run_forward(samples, batch, mode, seed, true, signature);
  const std::size_t n = batch.size(), stride = samples.stride(), hs = samples.h_slots(), vs = samples.v_slots(),
                    ce = cfg_.ch_e;
  std::vector<std::int32_t> targets(n * cfg_.l_t);
  for (std::size_t i = 0; i < n; ++i) {
    codec_.encode_indices(samples.target_text(batch[i]), cfg_.l_t, targets.data() + i * cfg_.l_t);
  }
  nn::LossResult lr = nn::softmax_xent_indexed(f.scores, targets, cfg_.l_t, codec_.size());

  auto g_chnn = chnn_.make_gradients(), g_hnn = hnn_.make_gradients(), g_vnn = vnn_.make_gradients(),
       g_lnn = lnn_.make_gradients(), g_eh = e_hidden_.make_gradients(), g_eo = e_output_.make_gradients();

  const Tensor g_emb = e_output_.backward(f.e_output, lr.grad, g_eo);
  const Tensor g_merge = e_hidden_.backward(f.e_hidden, g_emb, g_eh);
  auto [g_target, g_context] = split_columns(g_merge, ce);
  const Tensor g_cat = lnn_.backward(f.lnn, g_context, g_lnn);
  auto [g_hout, g_vout] = split_columns(g_cat, hnn_.output_shape()[0]);
  const Tensor g_h = hnn_.backward(f.hnn, g_hout, g_hnn);
  const Tensor g_v = vnn_.backward(f.vnn, g_vout, g_vnn);

  // Scatter-add every slot's gradient back onto its shared ChNN row, in sample order.
  Tensor g_chars(f.chars.shape());
  auto add_row = [&](std::int32_t row, const double* src) {
    double* dst = g_chars.data().data() + static_cast<std::size_t>(row) * ce;
    for (std::size_t k = 0; k < ce; ++k) dst[k] += src[k];
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t* rows = f.slot_rows.data() + i * stride;
    add_row(rows[0], g_target.data().data() + i * ce);
    for (std::size_t s = 0; s < hs; ++s) add_row(rows[1 + s], g_h.data().data() + (i * hs + s) * ce);
    for (std::size_t s = 0; s < vs; ++s) add_row(rows[1 + hs + s], g_v.data().data() + (i * vs + s) * ce);
  }
  chnn_.backward(f.chnn, g_chars, g_chnn);

  BatchLoss out;
  out.loss = lr.loss;
  for (auto* g : {&g_chnn, &g_hnn, &g_vnn, &g_lnn, &g_eh, &g_eo}) {
    for (auto& t : *g) out.grads.push_back(std::move(t));
  }
  for (const nn::Tape* t : {&f.chnn, &f.hnn, &f.vnn, &f.lnn, &f.e_hidden, &f.e_output}) {
    out.branch_signature.insert(out.branch_signature.end(), t->branch_signature.begin(), t->branch_signature.end());
  }
  return out;
}

TrainReport Sc2tModel::train(const SampleSet& samples, const TrainOptions& opt) {
  keep_large_blocks();
  check_samples(samples);
  if (samples.empty()) throw InvalidArgument("cannot train on an empty sample set");
  if (opt.batch == 0) throw InvalidArgument("batch size must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.samples = samples.size();

  std::vector<Tensor*> params = mutable_parameters();
  nn::AdamState state;
  nn::AdamConfig adam;
  adam.lr = opt.lr;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(opt.seed, epoch));
    shuffle_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += opt.batch) {
      const std::size_t e = std::min(order.size(), b + opt.batch);
      std::span<const std::size_t> batch(order.data() + b, e - b);
      BatchLoss bl = loss_and_gradients(samples, batch, Mode::Train, derive_seed(opt.seed, 1'000'003 + step++));
      nn::adam_step(params, bl.grads, state, adam);
      touch();
      total += bl.loss * static_cast<double>(batch.size());
    }
    const double mean = total / static_cast<double>(order.size());
    if (!std::isfinite(mean)) throw NumericError("training loss became non-finite");
    report.epoch_loss.push_back(mean);
    if (opt.on_epoch) opt.on_epoch(epoch, mean);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Tensor Sc2tModel::encode_chars(std::span<const std::string> texts) {
  const std::size_t d = codec_.size(), lt = cfg_.l_t;
  Tensor out({texts.size(), cfg_.ch_e});
  std::vector<std::int32_t> rows(lt);
  for (std::size_t b = 0; b < texts.size(); b += kEmbedChunk) {
    const std::size_t e = std::min(texts.size(), b + kEmbedChunk);
    Tensor x({e - b, lt, d});
    for (std::size_t u = b; u < e; ++u) {
      codec_.encode_indices(texts[u], lt, rows.data());
      for (std::size_t r = 0; r < lt; ++r) x[((u - b) * lt + r) * d + static_cast<std::size_t>(rows[r])] = 1.0;
    }
    const Tensor c = chnn_.infer(x);
    std::copy(c.values().begin(), c.values().end(), out.data().data() + b * cfg_.ch_e);
  }
  return out;
}

Tensor Sc2tModel::vocab_encodings(const SampleSet& samples, std::vector<double>& pad_chars) {
  const Tensor pad = chnn_.infer(Tensor({1, cfg_.l_t, codec_.size()}));
  pad_chars.assign(pad.values().begin(), pad.values().end());
  return encode_chars(samples.vocab());
}

void Sc2tModel::embed_range(const SampleSet& samples, const Tensor& vocab_chars, const std::vector<double>& pad_chars,
                            std::size_t begin, std::size_t end, Tensor* out_embed, EmbeddingParts* out_parts) {
  const std::size_t hs = samples.h_slots(), vs = samples.v_slots(), ce = cfg_.ch_e, dim = embedding_dim();
  // Eval-mode forwards do not touch layer state, so chunks may run concurrently
  // on copies of the context networks.
  nn::Network hnn = hnn_, vnn = vnn_, lnn = lnn_, eh = e_hidden_;
  for (std::size_t b = begin; b < end; b += kEmbedChunk) {
    const std::size_t e = std::min(end, b + kEmbedChunk), n = e - b;
    Tensor target({n, ce}), h({n, hs, ce}), v({n, vs, ce});
    auto copy_id = [&](std::int32_t id, double* dst) {
      const double* src = id < 0 ? pad_chars.data() : vocab_chars.data().data() + static_cast<std::size_t>(id) * ce;
      std::copy_n(src, ce, dst);
    };
    for (std::size_t i = 0; i < n; ++i) {
      const ContextSample s = samples[b + i];
      copy_id(s.target, target.data().data() + i * ce);
      for (std::size_t k = 0; k < hs; ++k) copy_id(s.h_ctx[k], h.data().data() + (i * hs + k) * ce);
      for (std::size_t k = 0; k < vs; ++k) copy_id(s.v_ctx[k], v.data().data() + (i * vs + k) * ce);
    }
    const Tensor context = lnn.infer(concat_columns(hnn.infer(h), vnn.infer(v)));
    if (out_parts) {
      std::copy(target.values().begin(), target.values().end(), out_parts->chars.data().data() + b * ce);
      std::copy(context.values().begin(), context.values().end(),
                out_parts->context.data().data() + b * cfg_.s_e);
    }
    if (out_embed) {
      const Tensor emb = eh.infer(concat_columns(target, context));
      std::copy(emb.values().begin(), emb.values().end(), out_embed->data().data() + b * dim);
    }
  }
}

Tensor Sc2tModel::embed(const SampleSet& samples, std::size_t threads) {
  keep_large_blocks();
  check_samples(samples);
  std::vector<double> pad;
  const Tensor vocab = vocab_encodings(samples, pad);
  Tensor out({samples.size(), embedding_dim()});
  parallel_chunks(samples.size(), threads, [&](std::size_t b, std::size_t e) {
    embed_range(samples, vocab, pad, b, e, &out, nullptr);
  });
  return out;
}

std::vector<double> Sc2tModel::embed_token(const SampleSet& samples, std::size_t i) {
  check_samples(samples);
  const std::size_t idx[1] = {i};
  Forward f = run_forward(samples, idx, Mode::Eval, 0, false);
  return {f.embedding.values().begin(), f.embedding.values().end()};
}

EmbeddingParts Sc2tModel::embed_parts(const SampleSet& samples, std::size_t threads) {
  check_samples(samples);
  std::vector<double> pad;
  const Tensor vocab = vocab_encodings(samples, pad);
  EmbeddingParts parts{Tensor({samples.size(), cfg_.ch_e}), Tensor({samples.size(), cfg_.s_e})};
  parallel_chunks(samples.size(), threads, [&](std::size_t b, std::size_t e) {
    embed_range(samples, vocab, pad, b, e, nullptr, &parts);
  });
  return parts;
}

std::string Sc2tModel::reconstruct(const SampleSet& samples, std::size_t i) {
  const std::size_t idx[1] = {i};
  Forward f = run_forward(samples, idx, Mode::Eval, 0, true);
  return codec_.decode(std::move(f.scores).reshaped({cfg_.l_t, codec_.size()}));
}

void Sc2tModel::save(std::ostream& os) const {
  os.write(kMagic, 4);
  nn::write_u32(os, kFormatVersion);
  const auto fields = config_fields(cfg_);
  nn::write_u32(os, static_cast<std::uint32_t>(fields.size()));
  for (const auto& f : fields) {
    nn::write_string(os, f.name);
    nn::write_f64(os, f.value);
  }
  nn::write_u64(os, cfg_.seed);
  nn::write_string(os, utf8_encode(codec_.alphabet()));
  for (const nn::Network* n : {&chnn_, &hnn_, &vnn_, &lnn_, &e_hidden_, &e_output_}) n->save(os);
  if (!os) throw DataError("failed to write model");
}

Sc2tModel Sc2tModel::load(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw DataError("not an SC2T model file");
  const std::uint32_t version = nn::read_u32(is);
  if (version != kFormatVersion) throw DataError("unsupported model format version " + std::to_string(version));
  const std::uint32_t count = nn::read_u32(is);
  if (count > 256) throw DataError("config header too long");
  std::unordered_map<std::string, double> fields;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = nn::read_string(is);
    fields[name] = nn::read_f64(is);
  }
  auto get = [&](const char* name) {
    auto it = fields.find(name);
    if (it == fields.end()) throw DataError(std::string("model config is missing ") + name);
    return it->second;
  };
  auto get_size = [&](const char* name) {
    const double v = get(name);
    if (!(v >= 0 && v < 1e9) || v != std::floor(v)) throw DataError(std::string("bad model config value ") + name);
    return static_cast<std::size_t>(v);
  };
  Sc2tConfig cfg;
  cfg.s_e = get_size("s_e");
  cfg.ch_e = get_size("ch_e");
  cfg.l_t = get_size("l_t");
  cfg.h_w = get_size("h_w");
  cfg.v_w = get_size("v_w");
  cfg.n_f = get_size("n_f");
  cfg.filter_width = get_size("filter_width");
  cfg.char_fc_units = get_size("char_fc_units");
  cfg.dropout_inner = get("dropout_inner");
  cfg.dropout_merge = get("dropout_merge");
  cfg.seed = nn::read_u64(is);
  const std::string alphabet = nn::read_string(is);

  Sc2tModel model = [&] {
    try {
      return Sc2tModel(cfg, CharCodec(utf8_decode(alphabet)));
    } catch (const InvalidArgument& e) {
      throw DataError(std::string("invalid model config: ") + e.what());
    }
  }();
  for (nn::Network* n : {&model.chnn_, &model.hnn_, &model.vnn_, &model.lnn_, &model.e_hidden_, &model.e_output_}) {
    nn::Network loaded = nn::Network::load(is);
    if (loaded.specs().size() != n->specs().size() || loaded.input_shape() != n->input_shape() ||
        loaded.output_shape() != n->output_shape()) {
      throw DataError("model layers do not match the config header");
    }
    *n = std::move(loaded);
  }
  return model;
}

void Sc2tModel::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  save(os);
}

Sc2tModel Sc2tModel::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path);
  return load(is);
}

Tensor embed_token_k(const EmbeddingParts& parts, double k) {
  if (!(k >= 0.0 && k <= 1.0)) throw InvalidArgument("K must be in [0, 1]");
  const std::size_t n = parts.chars.dim(0);
  if (parts.context.dim(0) != n) throw InvalidArgument("character and context parts differ in length");
  const auto c = parts.chars.matrix();
  const auto x = parts.context.matrix();
  const double denom = std::max<double>(1.0, static_cast<double>(n));
  const double rms_c = std::sqrt(c.squaredNorm() / denom);
  const double rms_x = std::sqrt(x.squaredNorm() / denom);
  const double sc = rms_c > 0.0 ? k / rms_c : 0.0;
  const double sx = rms_x > 0.0 ? (1.0 - k) / rms_x : 0.0;
  Tensor out({n, static_cast<std::size_t>(c.cols() + x.cols())});
  auto m = out.matrix();
  m.leftCols(c.cols()) = c * sc;
  m.rightCols(x.cols()) = x * sx;
  return out;
}

double char_norm_fraction(const Tensor& embeddings, std::size_t ch_e) {
  const auto m = embeddings.matrix();
  if (static_cast<std::size_t>(m.cols()) < ch_e) throw InvalidArgument("embedding narrower than the character part");
  double sum = 0.0;
  std::size_t counted = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double c = m.row(i).head(static_cast<Eigen::Index>(ch_e)).norm();
    const double x = m.row(i).tail(m.cols() - static_cast<Eigen::Index>(ch_e)).norm();
    if (c + x > 0.0) {
      sum += c / (c + x);
      ++counted;
    }
  }
  return counted ? sum / static_cast<double>(counted) : 0.0;
}

std::vector<double> embed_line(std::span<const std::vector<double>> token_embeddings) {
  if (token_embeddings.empty()) throw InvalidArgument("cannot embed an empty line");
  std::vector<double> out = token_embeddings.front();
  for (const auto& e : token_embeddings.subspan(1)) {
    if (e.size() != out.size()) throw InvalidArgument("token embeddings differ in dimension");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::max(out[k], e[k]);
  }
  return out;
}

std::vector<double> embed_line(const Tensor& embeddings, std::span<const std::size_t> rows) {
  if (rows.empty()) throw InvalidArgument("cannot embed an empty line");
  const std::size_t dim = embeddings.dim(1);
  std::vector<double> out(embeddings.data().data() + rows[0] * dim, embeddings.data().data() + (rows[0] + 1) * dim);
  for (std::size_t r : rows.subspan(1)) {
    const double* row = embeddings.data().data() + r * dim;
    for (std::size_t k = 0; k < dim; ++k) out[k] = std::max(out[k], row[k]);
  }
  return out;
}

}  // namespace sc2t

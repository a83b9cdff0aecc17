#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sc2t/context_window.hpp"
#include "sc2t/nn/network.hpp"
#include "sc2t/nn/optim.hpp"
#include "sc2t/text_grid.hpp"

namespace sc2t {

struct Sc2tConfig {
  std::size_t s_e = 50;   // context embedding size
  std::size_t ch_e = 50;  // character embedding size
  std::size_t l_t = 20;
  std::size_t h_w = 21;
  std::size_t v_w = 5;
  std::size_t n_f = 64;  // conv filters
  std::size_t filter_width = 3;
  std::size_t char_fc_units = 16;
  double dropout_inner = 0.25;
  double dropout_merge = 0.5;
  std::uint64_t seed = 1;

  WindowConfig window() const { return {h_w, v_w, l_t}; }
  std::size_t embedding_dim() const { return ch_e + s_e; }
  void validate() const;
  friend bool operator==(const Sc2tConfig&, const Sc2tConfig&) = default;
};

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  // Called after every epoch with (epoch, mean loss).
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::size_t samples = 0;
  double wall_seconds = 0.0;
};

// Character part (ChNN of the target) and context part (LNN output) of each sample.
struct EmbeddingParts {
  nn::Tensor chars;    // [N, ch_e]
  nn::Tensor context;  // [N, s_e]
};

struct BatchLoss {
  double loss = 0.0;
  std::vector<nn::Tensor> grads;  // same order as Sc2tModel::parameters()
  std::vector<std::uint64_t> branch_signature;
};

// The five sub-networks: a shared character encoder (ChNN), horizontal and
// vertical context encoders (HNN, VNN), their merge (LNN) and the
// reconstruction head E. The embedding is E's first hidden layer.
class Sc2tModel {
 public:
  explicit Sc2tModel(const Sc2tConfig& cfg, CharCodec codec = {});

  const Sc2tConfig& config() const { return cfg_; }
  const CharCodec& codec() const { return codec_; }
  std::size_t embedding_dim() const { return cfg_.embedding_dim(); }

  nn::Network& chnn() { return chnn_; }
  nn::Network& hnn() { return hnn_; }
  nn::Network& vnn() { return vnn_; }
  nn::Network& lnn() { return lnn_; }
  nn::Network& e_hidden() { return e_hidden_; }
  nn::Network& e_output() { return e_output_; }
  const nn::Network& chnn() const { return chnn_; }

  std::vector<nn::Tensor*> mutable_parameters();
  std::vector<const nn::Tensor*> parameters() const;
  std::size_t parameter_count() const;
  void touch();

  TrainReport train(const SampleSet& samples, const TrainOptions& opt);

  // Loss and gradients of the reconstruction objective on a batch.
  // branch_signature is only filled when `signature` is set.
  BatchLoss loss_and_gradients(const SampleSet& samples, std::span<const std::size_t> batch, nn::Mode mode,
                               std::uint64_t seed, bool signature = false);
  double loss(const SampleSet& samples, std::span<const std::size_t> batch, nn::Mode mode, std::uint64_t seed,
              std::vector<std::uint64_t>* signature = nullptr);

  // Eval-mode embeddings [N, ch_e + s_e] for every sample.
  nn::Tensor embed(const SampleSet& samples, std::size_t threads = 1);
  std::vector<double> embed_token(const SampleSet& samples, std::size_t i);
  EmbeddingParts embed_parts(const SampleSet& samples, std::size_t threads = 1);

  // Character encodings [n, ch_e] of arbitrary token texts (eval mode).
  nn::Tensor encode_chars(std::span<const std::string> texts);

  // Decoded reconstruction of the target from E's output.
  std::string reconstruct(const SampleSet& samples, std::size_t i);

  void save(std::ostream& os) const;
  static Sc2tModel load(std::istream& is);
  void save_file(const std::string& path) const;
  static Sc2tModel load_file(const std::string& path);

 private:
  struct Forward;
  void check_samples(const SampleSet& samples) const;
  nn::Tensor char_input(const SampleSet& samples, std::span<const std::int32_t> ids) const;
  Forward run_forward(const SampleSet& samples, std::span<const std::size_t> batch, nn::Mode mode, std::uint64_t seed,
                      bool need_scores, bool signatures = false);
  void embed_range(const SampleSet& samples, const nn::Tensor& vocab_chars, const std::vector<double>& pad_chars,
                   std::size_t begin, std::size_t end, nn::Tensor* out_embed, EmbeddingParts* out_parts);
  nn::Tensor vocab_encodings(const SampleSet& samples, std::vector<double>& pad_chars);

  Sc2tConfig cfg_;
  CharCodec codec_;
  nn::Network chnn_, hnn_, vnn_, lnn_, e_hidden_, e_output_;
};

// Alternative embedding: concat(K * c / rms_c, (1 - K) * x / rms_x), with the
// root-mean-square norms taken over the whole set of parts.
nn::Tensor embed_token_k(const EmbeddingParts& parts, double k);

// Mean over rows of |char part| / (|char part| + |context part|).
double char_norm_fraction(const nn::Tensor& embeddings, std::size_t ch_e);

// Coordinate-wise maximum of a line's token embeddings.
std::vector<double> embed_line(std::span<const std::vector<double>> token_embeddings);
std::vector<double> embed_line(const nn::Tensor& embeddings, std::span<const std::size_t> rows);

}  // namespace sc2t

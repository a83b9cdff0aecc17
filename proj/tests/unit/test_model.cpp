#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "sc2t/error.hpp"
#include "sc2t/model.hpp"
#include "sc2t/nn/gradcheck.hpp"
#include "sc2t/pipeline.hpp"

using namespace sc2t;
using nn::Tensor;

namespace {

Sc2tConfig tiny_config() {
  Sc2tConfig c;
  c.s_e = 4;
  c.ch_e = 3;
  c.l_t = 5;
  c.h_w = 3;
  c.v_w = 3;
  c.n_f = 3;
  c.char_fc_units = 2;
  c.seed = 17;
  return c;
}

Sc2tConfig small_config() {
  Sc2tConfig c;
  c.s_e = 8;
  c.ch_e = 8;
  c.l_t = 6;
  c.h_w = 5;
  c.v_w = 3;
  c.n_f = 8;
  c.char_fc_units = 6;
  c.seed = 3;
  return c;
}

SampleSet samples_of(const std::string& doc, const Sc2tConfig& cfg) {
  SampleSet s(cfg.window());
  s.append(tokenize_document(doc), 0);
  return s;
}

std::string periodic_doc(std::size_t lines) {
  std::string doc;
  for (std::size_t i = 0; i < lines; ++i) doc += "ab 7x\n";
  return doc;
}

std::string mixed_doc() {
  return "A1 2.5 foo 10/3 UK\n"
         "B22 3.75 barbaz 11/4 France\n"
         "C3 12 q 1/1 UK\n"
         "A1 0.5 foo 2/9 Spain\n"
         "  D44 7 zz 5/5 UK\n";
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

nn::GradCheckResult model_gradcheck(Sc2tModel& model, const SampleSet& set, std::vector<std::size_t> batch,
                                    const nn::GradCheckOptions& opt) {
  // Batch-norm statistics frozen (eval mode), so the objective is smooth.
  const BatchLoss bl = model.loss_and_gradients(set, batch, nn::Mode::Eval, 0);
  auto params = model.mutable_parameters();
  return nn::finite_difference_check(
      params, bl.grads,
      [&] {
        model.touch();
        nn::ObjectiveValue v;
        v.loss = model.loss(set, batch, nn::Mode::Eval, 0, &v.branch_signature);
        return v;
      },
      opt);
}

}  // namespace

TEST_SUITE("sc2t_model") {
  TEST_CASE("default configuration") {
    const Sc2tConfig cfg;
    CHECK(cfg.embedding_dim() == 100);
    CHECK(cfg.h_w == 21);
    CHECK(cfg.v_w == 5);
    Sc2tModel m(cfg);
    CHECK(m.codec().size() == 78);
    CHECK(m.chnn().input_shape() == nn::Shape{20, 78});
    CHECK(m.hnn().input_shape() == nn::Shape{20, 50});
    CHECK(m.vnn().input_shape() == nn::Shape{4, 50});
    CHECK(m.e_output().output_shape() == nn::Shape{20 * 78});
    CHECK(m.e_hidden().output_shape() == nn::Shape{100});
  }

  TEST_CASE("v_w = 3 gives two vertical neighbour embeddings") {
    Sc2tConfig cfg;
    cfg.v_w = 3;
    Sc2tModel m(cfg);
    CHECK(m.vnn().input_shape() == nn::Shape{2, 50});
  }

  TEST_CASE("invalid configurations") {
    Sc2tConfig c;
    c.h_w = 20;
    CHECK_THROWS_AS(Sc2tModel{c}, InvalidArgument);
    c = Sc2tConfig{};
    c.dropout_merge = 1.0;
    CHECK_THROWS_AS(Sc2tModel{c}, InvalidArgument);
    c = Sc2tConfig{};
    c.ch_e = 0;
    CHECK_THROWS_AS(Sc2tModel{c}, InvalidArgument);
  }

  TEST_CASE("same seed builds identical parameters") {
    Sc2tModel a(small_config()), b(small_config());
    auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
    Sc2tConfig other = small_config();
    other.seed = 4;
    Sc2tModel c(other);
    CHECK(!(*c.parameters()[0] == *pa[0]));
  }

  TEST_CASE("window mismatch is rejected") {
    Sc2tModel m(small_config());
    const SampleSet wrong = samples_of("a b c", tiny_config());
    CHECK_THROWS_AS(m.embed(wrong), InvalidArgument);
    CHECK_THROWS_AS(m.train(SampleSet(small_config().window()), {}), InvalidArgument);
  }

  TEST_CASE("full-model gradient check, every coordinate") {
    const Sc2tConfig cfg = tiny_config();
    Sc2tModel model(cfg);
    const SampleSet set = samples_of("ab c\nd ab\nc d", cfg);
    const auto res = model_gradcheck(model, set, {0, 4}, {});
    CHECK(res.checked + res.skipped == model.parameter_count());
    CHECK(res.skipped * 20 < model.parameter_count());
    CHECK(res.max_rel_error < 1e-4);
  }

  TEST_CASE("full-model gradient check at the default configuration, sampled coordinates") {
    Sc2tModel model(Sc2tConfig{});
    const SampleSet set = samples_of(mixed_doc(), Sc2tConfig{});
    nn::GradCheckOptions opt;
    opt.coords_per_tensor = 6;
    const auto res = model_gradcheck(model, set, {1, 7}, opt);
    CHECK(res.checked > 100);
    CHECK(res.max_rel_error < 1e-4);
  }

  TEST_CASE("training lowers the loss") {
    const Sc2tConfig cfg = small_config();
    std::string doc;
    for (int i = 0; i < 40; ++i) doc += "x" + std::to_string(i % 7) + " 3." + std::to_string(i % 5) + " ab" + std::to_string(i % 3) + " Q R\n";
    const SampleSet set = samples_of(doc, cfg);
    REQUIRE(set.size() == 200);
    Sc2tModel model(cfg);
    TrainOptions opt;
    opt.epochs = 10;
    opt.batch = 16;
    opt.lr = 3e-3;
    std::vector<double> seen;
    opt.on_epoch = [&](std::size_t, double l) { seen.push_back(l); };
    const TrainReport r = model.train(set, opt);
    REQUIRE(r.epoch_loss.size() == 10);
    CHECK(r.epoch_loss == seen);
    CHECK(r.samples == 200);
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    for (double l : r.epoch_loss) CHECK(std::isfinite(l));
  }

  TEST_CASE("periodic grid is reconstructed") {
    Sc2tConfig cfg = small_config();
    cfg.dropout_inner = 0.0;
    const SampleSet set = samples_of(periodic_doc(32), cfg);
    Sc2tModel model(cfg);
    TrainOptions opt;
    opt.epochs = 60;
    opt.batch = 16;
    opt.lr = 1e-2;
    model.train(set, opt);
    std::vector<std::size_t> all(set.size());
    std::iota(all.begin(), all.end(), 0);
    CHECK(model.loss(set, all, nn::Mode::Eval, 0) < 0.05);
    for (std::size_t i = 0; i < set.size(); ++i) CHECK(model.reconstruct(set, i) == set.target_text(i));
  }

  TEST_CASE("training is deterministic") {
    const Sc2tConfig cfg = tiny_config();
    const SampleSet set = samples_of(mixed_doc(), cfg);
    auto run = [&] {
      Sc2tModel m(cfg);
      TrainOptions opt;
      opt.epochs = 2;
      opt.batch = 4;
      const auto r = m.train(set, opt);
      std::ostringstream os;
      m.save(os);
      return std::make_pair(r.epoch_loss, os.str());
    };
    CHECK(run() == run());
  }

  TEST_CASE("embeddings are deterministic and depend only on text and context") {
    const Sc2tConfig cfg = small_config();
    Sc2tModel model(cfg);
    // Lines 1 and 3 are identical and so are their neighbourhoods.
    const SampleSet set = samples_of("p q r\nx y z\np q r\nx y z\np q r", cfg);
    const Tensor e1 = model.embed(set), e2 = model.embed(set);
    CHECK(e1 == e2);
    CHECK(e1.shape() == nn::Shape{15, 16});
    CHECK(model.embed_token(set, 4) == model.embed_token(set, 4));
    const std::vector<double> a = model.embed_token(set, 3), b = model.embed_token(set, 9);
    CHECK(a == b);
    const std::vector<double> row(e1.data().begin() + 3 * 16, e1.data().begin() + 4 * 16);
    CHECK(max_abs_diff(row, a) < 1e-12);
    for (double v : e1.values()) CHECK(v >= 0.0);  // post-ReLU
  }

  TEST_CASE("threaded embedding equals sequential") {
    const Sc2tConfig cfg = small_config();
    Sc2tModel model(cfg);
    std::string doc;
    for (int i = 0; i < 120; ++i) doc += "t" + std::to_string(i) + " v" + std::to_string(i % 9) + "\n";
    const SampleSet set = samples_of(doc, cfg);
    CHECK(model.embed(set, 1) == model.embed(set, 3));
  }

  TEST_CASE("horizontal translation leaves embeddings unchanged") {
    const Sc2tConfig cfg = small_config();
    Sc2tModel model(cfg);
    std::string shifted;
    std::istringstream is(mixed_doc());
    for (std::string l; std::getline(is, l);) shifted += "      " + l + "\n";
    CHECK(model.embed(samples_of(mixed_doc(), cfg)) == model.embed(samples_of(shifted, cfg)));
  }

  TEST_CASE("one character encoder serves target and neighbours") {
    const Sc2tConfig cfg = small_config();
    Sc2tModel model(cfg);
    const SampleSet set = samples_of(mixed_doc(), cfg);
    const std::string texts[] = {set.target_text(2)};
    const EmbeddingParts before = model.embed_parts(set);
    const Tensor enc = model.encode_chars(texts);
    for (std::size_t j = 0; j < cfg.ch_e; ++j) CHECK(before.chars.at(2, j) == doctest::Approx(enc.at(0, j)).epsilon(1e-12));

    model.chnn().mutable_parameters().back()->values()[0] += 0.5;  // output bias of ChNN
    model.touch();
    const EmbeddingParts after = model.embed_parts(set);
    CHECK(after.chars.at(2, 0) == doctest::Approx(before.chars.at(2, 0) + 0.5));
    // The context part moves too: neighbours went through the same encoder.
    CHECK(!(after.context == before.context));
  }

  TEST_CASE("K-weighted embeddings") {
    const Sc2tConfig cfg = small_config();
    Sc2tModel model(cfg);
    std::string doc;
    for (int i = 0; i < 30; ++i) doc += "id" + std::to_string(i) + " " + std::to_string(i * 7 % 13) + " word\n";
    const SampleSet set = samples_of(doc, cfg);
    const EmbeddingParts parts = model.embed_parts(set);
    const Tensor k0 = embed_token_k(parts, 0.0), k1 = embed_token_k(parts, 1.0), kh = embed_token_k(parts, 0.5);
    for (std::size_t i = 0; i < set.size(); ++i) {
      for (std::size_t j = 0; j < cfg.ch_e; ++j) CHECK(k0.at(i, j) == 0.0);
      for (std::size_t j = cfg.ch_e; j < cfg.embedding_dim(); ++j) CHECK(k1.at(i, j) == 0.0);
    }
    CHECK(char_norm_fraction(kh, cfg.ch_e) == doctest::Approx(0.5).epsilon(0.1));
    CHECK(char_norm_fraction(embed_token_k(parts, 0.8), cfg.ch_e) > 0.7);
    CHECK_THROWS_AS(embed_token_k(parts, 1.5), InvalidArgument);
    CHECK_THROWS_AS(embed_token_k(parts, -0.1), InvalidArgument);

    // Corpus-level scaling: multiplying both parts by a constant leaves the result unchanged.
    EmbeddingParts scaled = parts;
    for (double& v : scaled.chars.values()) v *= 3.0;
    for (double& v : scaled.context.values()) v *= 3.0;
    const Tensor ks = embed_token_k(scaled, 0.3), kr = embed_token_k(parts, 0.3);
    CHECK(max_abs_diff(ks.values(), kr.values()) < 1e-12);
  }

  TEST_CASE("line embedding is a coordinate-wise max") {
    const std::vector<std::vector<double>> one = {{1.0, -2.0}};
    CHECK(embed_line(one) == one[0]);
    const std::vector<std::vector<double>> two = {{1.0, 0.0}, {0.0, 2.0}};
    CHECK(embed_line(two) == std::vector<double>{1.0, 2.0});
    const std::vector<std::vector<double>> swapped = {{0.0, 2.0}, {1.0, 0.0}};
    CHECK(embed_line(swapped) == embed_line(two));
    CHECK_THROWS_AS(embed_line(std::vector<std::vector<double>>{}), InvalidArgument);
    CHECK_THROWS_AS(embed_line(std::vector<std::vector<double>>{{1.0}, {1.0, 2.0}}), InvalidArgument);
  }

  TEST_CASE("degenerate samples still produce deterministic output") {
    const Sc2tConfig cfg = small_config();
    Sc2tModel model(cfg);
    const SampleSet set = samples_of("~~~~", cfg);  // no neighbours, out-of-alphabet target
    const std::string r = model.reconstruct(set, 0);
    CHECK(r == model.reconstruct(set, 0));
    CHECK(r.size() <= cfg.l_t);
  }

  TEST_CASE("model files round trip") {
    const Sc2tConfig cfg = small_config();
    Sc2tModel model(cfg);
    const SampleSet set = samples_of(mixed_doc(), cfg);
    TrainOptions opt;
    opt.epochs = 1;
    opt.batch = 8;
    model.train(set, opt);
    std::stringstream ss;
    model.save(ss);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "SC2T");
    Sc2tModel back = Sc2tModel::load(ss);
    CHECK(back.config() == cfg);
    CHECK(back.embed(set) == model.embed(set));
    std::stringstream again;
    back.save(again);
    CHECK(again.str() == bytes);

    std::string bad = bytes;
    bad[5] ^= 0x7f;
    std::istringstream corrupt(bad);
    CHECK_THROWS_AS(Sc2tModel::load(corrupt), DataError);
    std::istringstream cut(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(Sc2tModel::load(cut), DataError);
  }
}

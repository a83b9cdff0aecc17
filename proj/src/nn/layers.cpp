#include "sc2t/nn/layers.hpp"

#include <cmath>

#include "sc2t/error.hpp"

namespace sc2t::nn {

namespace {

constexpr std::uint32_t kNoChannel = 0xffffffffu;

// Hot channel of every row when x is one-hot or all-zero per time step.
bool one_hot_rows(const Tensor& x, std::size_t c, std::vector<std::uint32_t>& hot) {
  const std::size_t rows = c == 0 ? 0 : x.size() / c;
  hot.assign(rows, kNoChannel);
  const double* p = x.data().data();
  for (std::size_t r = 0; r < rows; ++r, p += c) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      if (p[ch] == 0.0) continue;
      if (p[ch] != 1.0 || hot[r] != kNoChannel) return false;
      hot[r] = static_cast<std::uint32_t>(ch);
    }
  }
  return true;
}


void require_rank(const Shape& s, std::size_t rank, const char* layer) {
  if (s.size() != rank) {
    throw InvalidArgument(std::string(layer) + " expects per-sample rank " + std::to_string(rank) + ", got " +
                          shape_string(s));
  }
}

[[maybe_unused]] Shape batch_shape(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

void he_uniform(Tensor& w, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w.values()) v = rng.uniform(-limit, limit);
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::MaxPoolOverTime: return "max-pool-over-time";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Relu: return "relu";
    case LayerKind::BatchNorm: return "batch-norm";
    case LayerKind::Dropout: return "dropout";
  }
  return "unknown";
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::Dense:
      if (units == 0) throw InvalidArgument("dense layer needs at least one unit");
      break;
    case LayerKind::Conv1d:
      if (units == 0) throw InvalidArgument("conv1d needs at least one filter");
      if (width == 0) throw InvalidArgument("conv1d filter width must be >= 1");
      break;
    case LayerKind::Dropout:
      if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("dropout probability must be in [0, 1)");
      break;
    case LayerKind::MaxPoolOverTime:
    case LayerKind::Flatten:
    case LayerKind::Relu:
    case LayerKind::BatchNorm:
      break;
    default:
      throw InvalidArgument("unknown layer kind");
  }
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& sample_shape) {
  spec.validate();
  if (sample_shape.empty()) throw InvalidArgument("layer input needs a feature axis");
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<Dense>(sample_shape.back(), spec.units);
    case LayerKind::Conv1d:
      require_rank(sample_shape, 2, "conv1d");
      return std::make_unique<Conv1d>(sample_shape.back(), spec.units, spec.width);
    case LayerKind::MaxPoolOverTime: return std::make_unique<MaxPoolOverTime>();
    case LayerKind::Flatten: return std::make_unique<Flatten>();
    case LayerKind::Relu: return std::make_unique<Relu>();
    case LayerKind::BatchNorm: return std::make_unique<BatchNorm>(sample_shape.back());
    case LayerKind::Dropout: return std::make_unique<Dropout>(spec.p);
  }
  throw InvalidArgument("unknown layer kind");
}

// ---- Dense ----

Dense::Dense(std::size_t in, std::size_t out) : in_(in), out_(out), weight_({in, out}), bias_({out}) {}

Shape Dense::output_shape(const Shape& s) const {
  if (s.empty() || s.back() != in_) {
    throw InvalidArgument("dense expects " + std::to_string(in_) + " input features, got " + shape_string(s));
  }
  Shape out = s;
  out.back() = out_;
  return out;
}

void Dense::initialize(Rng& rng) {
  he_uniform(weight_, in_, rng);
  bias_.fill(0.0);
}

Tensor Dense::forward(const Tensor& x, Mode mode, Rng&, LayerCache& cache) {
  if (x.rank() < 2 || x.shape().back() != in_) throw InvalidArgument("dense input shape " + shape_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape.back() = out_;
  Tensor y(out_shape);
  auto ym = y.matrix();
  cache.mode = mode;
  cache.input_shape = x.shape();
  if (one_hot_rows(x, in_, cache.index)) {
    cache.sparse = true;
    const auto w = weight_.matrix();
    ym.rowwise() = bias_.matrix(1).row(0);
    for (Eigen::Index r = 0; r < ym.rows(); ++r) {
      const std::uint32_t h = cache.index[static_cast<std::size_t>(r)];
      if (h != kNoChannel) ym.row(r) += w.row(h);
    }
    return y;
  }
  cache.index.clear();
  ym.noalias() = x.matrix() * weight_.matrix();
  ym.rowwise() += bias_.matrix(1).row(0);
  cache.saved = x;
  return y;
}

Tensor Dense::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const {
  const auto g = dy.matrix();
  grads[1]->matrix(1).row(0) += g.colwise().sum();
  if (cache.sparse) {
    auto gw = grads[0]->matrix();
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const std::uint32_t h = cache.index[static_cast<std::size_t>(r)];
      if (h != kNoChannel) gw.row(h) += g.row(r);
    }
  } else {
    grads[0]->matrix().noalias() += cache.saved.matrix().transpose() * g;
  }
  if (!cache.want_input_grad) return Tensor();
  Tensor dx(cache.input_shape);
  dx.matrix().noalias() = g * weight_.matrix().transpose();
  return dx;
}

// ---- Conv1d ----

Conv1d::Conv1d(std::size_t channels, std::size_t filters, std::size_t width)
    : channels_(channels), filters_(filters), width_(width), weight_({width * channels, filters}), bias_({filters}) {}

Shape Conv1d::output_shape(const Shape& s) const {
  require_rank(s, 2, "conv1d");
  if (s[1] != channels_) {
    throw InvalidArgument("conv1d expects " + std::to_string(channels_) + " channels, got " + shape_string(s));
  }
  return {s[0], filters_};
}

void Conv1d::initialize(Rng& rng) {
  he_uniform(weight_, width_ * channels_, rng);
  bias_.fill(0.0);
}

Tensor Conv1d::forward(const Tensor& x, Mode mode, Rng&, LayerCache& cache) {
  if (x.rank() != 3 || x.dim(2) != channels_) throw InvalidArgument("conv1d input shape " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), steps = x.dim(1), c = channels_;
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((width_ - 1) / 2);
  cache.mode = mode;
  cache.input_shape = x.shape();

  Tensor y({n, steps, filters_});
  auto ym = y.matrix();
  ym.rowwise() = bias_.matrix(1).row(0);

  if (one_hot_rows(x, c, cache.index)) {
    // Character input: the product with W reduces to a sum of selected rows.
    cache.sparse = true;
    const auto w = weight_.matrix();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t t = 0; t < steps; ++t) {
        auto out = ym.row(static_cast<Eigen::Index>(b * steps + t));
        for (std::size_t k = 0; k < width_; ++k) {
          const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t) - left + static_cast<std::ptrdiff_t>(k);
          if (st < 0 || st >= static_cast<std::ptrdiff_t>(steps)) continue;
          const std::uint32_t h = cache.index[b * steps + static_cast<std::size_t>(st)];
          if (h != kNoChannel) out += w.row(static_cast<Eigen::Index>(k * c + h));
        }
      }
    }
    return y;
  }
  cache.index.clear();

  // im2col: row (b, t) holds the window x[b, t - left + k, :] for k in [0, width).
  Tensor cols({n * steps, width_ * c});
  const double* src = x.data().data();
  double* dst = cols.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      double* row = dst + (b * steps + t) * width_ * c;
      for (std::size_t k = 0; k < width_; ++k) {
        const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t) - left + static_cast<std::ptrdiff_t>(k);
        if (st >= 0 && st < static_cast<std::ptrdiff_t>(steps)) {
          std::copy_n(src + (b * steps + static_cast<std::size_t>(st)) * c, c, row + k * c);
        }
      }
    }
  }
  ym.noalias() += cols.matrix() * weight_.matrix();
  cache.saved = std::move(cols);
  return y;
}

Tensor Conv1d::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const {
  const std::size_t n = cache.input_shape[0], steps = cache.input_shape[1], c = channels_;
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((width_ - 1) / 2);
  const auto g = dy.matrix();
  grads[1]->matrix(1).row(0) += g.colwise().sum();

  auto for_each_tap = [&](auto&& fn) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 0; k < width_; ++k) {
          const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t) - left + static_cast<std::ptrdiff_t>(k);
          if (st < 0 || st >= static_cast<std::ptrdiff_t>(steps)) continue;
          fn(b * steps + t, k, b * steps + static_cast<std::size_t>(st));
        }
      }
    }
  };

  if (cache.sparse) {
    auto gw = grads[0]->matrix();
    for_each_tap([&](std::size_t row, std::size_t k, std::size_t src) {
      const std::uint32_t h = cache.index[src];
      if (h != kNoChannel) gw.row(static_cast<Eigen::Index>(k * c + h)) += g.row(static_cast<Eigen::Index>(row));
    });
    if (!cache.want_input_grad) return Tensor();
    Tensor dx(cache.input_shape);
    auto dxm = dx.matrix();
    const auto w = weight_.matrix();
    for_each_tap([&](std::size_t row, std::size_t k, std::size_t src) {
      dxm.row(static_cast<Eigen::Index>(src)).noalias() +=
          g.row(static_cast<Eigen::Index>(row)) * w.middleRows(static_cast<Eigen::Index>(k * c), c).transpose();
    });
    return dx;
  }

  grads[0]->matrix().noalias() += cache.saved.matrix().transpose() * g;
  if (!cache.want_input_grad) return Tensor();
  RowMatrix dcols = g * weight_.matrix().transpose();
  Tensor dx(cache.input_shape);
  double* dst = dx.data().data();
  for_each_tap([&](std::size_t row, std::size_t k, std::size_t src) {
    const double* in = dcols.data() + row * width_ * c + k * c;
    double* out = dst + src * c;
    for (std::size_t ch = 0; ch < c; ++ch) out[ch] += in[ch];
  });
  return dx;
}

// ---- MaxPoolOverTime ----

Shape MaxPoolOverTime::output_shape(const Shape& s) const {
  require_rank(s, 2, "max-pool-over-time");
  if (s[0] == 0) throw InvalidArgument("max-pool-over-time needs a non-empty sequence");
  return {s[1]};
}

Tensor MaxPoolOverTime::forward(const Tensor& x, Mode mode, Rng&, LayerCache& cache) {
  if (x.rank() != 3 || x.dim(1) == 0) throw InvalidArgument("max-pool input shape " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), steps = x.dim(1), c = x.dim(2);
  Tensor y({n, c});
  cache.index.assign(n * c, 0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::size_t best = 0;
      double best_v = x[(b * steps) * c + ch];
      for (std::size_t t = 1; t < steps; ++t) {
        const double v = x[(b * steps + t) * c + ch];
        if (v > best_v) {
          best_v = v;
          best = t;
        }
      }
      y[b * c + ch] = best_v;
      cache.index[b * c + ch] = static_cast<std::uint32_t>(best);
    }
  }
  cache.mode = mode;
  cache.input_shape = x.shape();
  return y;
}

Tensor MaxPoolOverTime::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>&) const {
  const std::size_t n = cache.input_shape[0], steps = cache.input_shape[1], c = cache.input_shape[2];
  Tensor dx(cache.input_shape);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      dx[(b * steps + cache.index[b * c + ch]) * c + ch] += dy[b * c + ch];
    }
  }
  return dx;
}

void MaxPoolOverTime::branch_signature(const LayerCache& cache, std::vector<std::uint64_t>& out) const {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (auto i : cache.index) h = mix_seed(h ^ i);
  out.push_back(h);
}

// ---- Flatten ----

Shape Flatten::output_shape(const Shape& s) const { return {shape_size(s)}; }

Tensor Flatten::forward(const Tensor& x, Mode mode, Rng&, LayerCache& cache) {
  cache.mode = mode;
  cache.input_shape = x.shape();
  const std::size_t n = x.dim(0);
  return x.reshaped({n, n ? x.size() / n : 0});
}

Tensor Flatten::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>&) const {
  return dy.reshaped(cache.input_shape);
}

// ---- Relu ----

Tensor Relu::forward(const Tensor& x, Mode mode, Rng&, LayerCache& cache) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  cache.mode = mode;
  cache.input_shape = x.shape();
  cache.saved = y;
  return y;
}

Tensor Relu::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>&) const {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(cache.saved[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

void Relu::branch_signature(const LayerCache& cache, std::vector<std::uint64_t>& out) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < cache.saved.size(); ++i) {
    word = (word << 1) | (cache.saved[i] > 0.0 ? 1U : 0U);
    if (i % 64 == 63) {
      h = mix_seed(h ^ word);
      word = 0;
    }
  }
  out.push_back(mix_seed(h ^ word));
}

// ---- BatchNorm ----

BatchNorm::BatchNorm(std::size_t features)
    : features_(features),
      gamma_({features}, 1.0),
      beta_({features}, 0.0),
      running_mean_({features}, 0.0),
      running_var_({features}, 1.0) {}

void BatchNorm::initialize(Rng&) {
  gamma_.fill(1.0);
  beta_.fill(0.0);
  running_mean_.fill(0.0);
  running_var_.fill(1.0);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode, Rng&, LayerCache& cache) {
  if (x.rank() < 2 || x.shape().back() != features_) {
    throw InvalidArgument("batch-norm input shape " + shape_string(x.shape()));
  }
  const auto xm = x.matrix();
  const Eigen::Index rows = xm.rows();
  Tensor y(x.shape());
  auto ym = y.matrix();
  const auto gamma = gamma_.matrix(1).row(0).array();
  const auto beta = beta_.matrix(1).row(0).array();
  cache.mode = mode;
  cache.input_shape = x.shape();

  if (mode == Mode::Train && rows > 0) {
    const Eigen::RowVectorXd mean = xm.colwise().mean();
    Tensor xhat(x.shape());
    auto centered = xhat.matrix();
    centered = xm.rowwise() - mean;
    const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    const Eigen::RowVectorXd inv_std = (var.array() + kEpsilon).rsqrt();
    centered.array().rowwise() *= inv_std.array();
    ym.array() = (centered.array().rowwise() * gamma).rowwise() + beta;

    auto rm = running_mean_.matrix(1).row(0);
    auto rv = running_var_.matrix(1).row(0);
    const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
    rm = (1.0 - kMomentum) * rm + kMomentum * mean;
    rv = (1.0 - kMomentum) * rv + kMomentum * (var * unbias);

    cache.saved = std::move(xhat);
    cache.aux = Tensor({features_}, std::vector<double>(inv_std.data(), inv_std.data() + inv_std.size()));
  } else {
    const Eigen::RowVectorXd inv_std = (running_var_.matrix(1).row(0).array() + kEpsilon).rsqrt();
    const Eigen::RowVectorXd scale = inv_std.array() * gamma;
    const Eigen::RowVectorXd shift = beta - running_mean_.matrix(1).row(0).array() * scale.array();
    ym.array() = (xm.array().rowwise() * scale.array()).rowwise() + shift.array();
    cache.mode = Mode::Eval;
    cache.saved = x;
    cache.aux = Tensor({features_}, std::vector<double>(inv_std.data(), inv_std.data() + inv_std.size()));
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const {
  const auto g = dy.matrix();
  const auto gamma = gamma_.matrix(1).row(0).array();
  const auto inv_std = cache.aux.matrix(1).row(0).array();
  Tensor dx(cache.input_shape);
  auto dxm = dx.matrix();

  if (cache.mode == Mode::Train) {
    const auto xhat = cache.saved.matrix();
    const double rows = static_cast<double>(xhat.rows());
    const Eigen::RowVectorXd dbeta = g.colwise().sum();
    const Eigen::RowVectorXd dgamma = (g.array() * xhat.array()).colwise().sum();
    grads[0]->matrix(1).row(0) += dgamma;
    grads[1]->matrix(1).row(0) += dbeta;
    // dx = gamma * inv_std / N * (N*dy - sum(dy) - xhat * sum(dy*xhat))
    const Eigen::RowVectorXd coef = gamma * inv_std / rows;
    dxm.array() = ((rows * g.array()).rowwise() - dbeta.array() - xhat.array().rowwise() * dgamma.array()).rowwise() *
                  coef.array();
  } else {
    const auto x = cache.saved.matrix();
    const Eigen::RowVectorXd mean = running_mean_.matrix(1).row(0);
    RowMatrix xhat = x.rowwise() - mean;
    xhat.array().rowwise() *= inv_std;
    grads[0]->matrix(1).row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
    grads[1]->matrix(1).row(0) += g.colwise().sum();
    const Eigen::RowVectorXd scale = gamma * inv_std;
    dxm.array() = g.array().rowwise() * scale.array();
  }
  return dx;
}

// ---- Dropout ----

Dropout::Dropout(double p) : p_(p) {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("dropout probability must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) {
  cache.mode = mode;
  cache.input_shape = x.shape();
  if (mode == Mode::Eval || p_ == 0.0) {
    cache.saved = Tensor();
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - p_);
  // Counter-based stream: one splitmix hash per element, drop when its top
  // 53 bits read as a uniform fall below p.
  const auto drop_below = static_cast<std::uint64_t>(std::ceil(p_ * 0x1.0p53));
  const std::uint64_t base = rng.next();
  Tensor mask(x.shape());
  Tensor y(x.shape());
  const double* in = x.data().data();
  double* m = mask.data().data();
  double* out = y.data().data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = (mix_seed(base + i) >> 11) < drop_below ? 0.0 : keep_scale;
    out[i] = in[i] * m[i];
  }
  cache.saved = std::move(mask);
  return y;
}

Tensor Dropout::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>&) const {
  if (cache.saved.empty()) return dy;
  Tensor dx = dy;
  auto d = dx.data().data();
  const double* m = cache.saved.data().data();
  for (std::size_t i = 0; i < dx.size(); ++i) d[i] *= m[i];
  return dx;
}

}  // namespace sc2t::nn

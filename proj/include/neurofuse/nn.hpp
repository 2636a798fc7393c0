#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurofuse/core.hpp"

namespace neurofuse::nn {

/// Layer sizes of the conv -> pool -> conv -> pool -> dense -> softmax stack.
/// Both convolutions are valid (no padding, stride 1) and followed by ReLU.
struct Architecture {
  Index input_len = 739;
  Index conv1_filters = 32;
  Index conv1_kernel = 5;
  Index conv2_filters = 64;
  Index conv2_kernel = 5;
  Index pool = 2;
  Index dense_units = 128;
  Index classes = kNumEmotions;

  Index conv1_len() const { return input_len - conv1_kernel + 1; }
  Index pool1_len() const { return conv1_len() / pool; }
  Index conv2_len() const { return pool1_len() - conv2_kernel + 1; }
  Index pool2_len() const { return conv2_len() / pool; }
  Index flat_len() const { return pool2_len() * conv2_filters; }

  void validate() const {
    if (input_len < 1 || conv1_filters < 1 || conv1_kernel < 1 || conv2_filters < 1 ||
        conv2_kernel < 1 || pool < 1 || dense_units < 1 || classes < 2) {
      throw ValidationError("architecture sizes must be positive");
    }
    if (conv1_len() < 1 || pool1_len() < 1 || conv2_len() < 1 || pool2_len() < 1) {
      throw ValidationError("input length " + std::to_string(input_len) +
                            " is too short for the configured kernels");
    }
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

void to_json(nlohmann::json& j, const Architecture& a);
void from_json(const nlohmann::json& j, Architecture& a);

/// Weights are stored as (out x kernel*in); column j*in + c is tap j of
/// input channel c, which matches the channel-last activation layout.
template <typename Scalar>
struct Conv1d {
  RowMatrix<Scalar> weight;
  RowMatrix<Scalar> bias;  // 1 x out
  Index in_channels = 1;
  Index kernel = 1;

  Index out_channels() const { return weight.rows(); }
};

template <typename Scalar>
struct Dense {
  RowMatrix<Scalar> weight;  // out x in
  RowMatrix<Scalar> bias;    // 1 x out
};

inline constexpr std::array<std::string_view, 8> kTensorNames = {
    "conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias",
    "dense.weight", "dense.bias", "output.weight", "output.bias"};

template <typename Scalar>
struct ModelParams {
  Architecture arch;
  Conv1d<Scalar> conv1, conv2;
  Dense<Scalar> dense, output;
  /// Bumped by every optimizer step; forward caches remember it.
  std::uint64_t version = 0;

  static ModelParams zeros(const Architecture& arch) {
    arch.validate();
    ModelParams p;
    p.arch = arch;
    p.conv1 = {RowMatrix<Scalar>::Zero(arch.conv1_filters, arch.conv1_kernel),
               RowMatrix<Scalar>::Zero(1, arch.conv1_filters), 1, arch.conv1_kernel};
    p.conv2 = {RowMatrix<Scalar>::Zero(arch.conv2_filters, arch.conv2_kernel * arch.conv1_filters),
               RowMatrix<Scalar>::Zero(1, arch.conv2_filters), arch.conv1_filters, arch.conv2_kernel};
    p.dense = {RowMatrix<Scalar>::Zero(arch.dense_units, arch.flat_len()),
               RowMatrix<Scalar>::Zero(1, arch.dense_units)};
    p.output = {RowMatrix<Scalar>::Zero(arch.classes, arch.dense_units),
                RowMatrix<Scalar>::Zero(1, arch.classes)};
    return p;
  }

  std::array<RowMatrix<Scalar>*, 8> tensors() {
    return {&conv1.weight, &conv1.bias, &conv2.weight, &conv2.bias,
            &dense.weight, &dense.bias, &output.weight, &output.bias};
  }
  std::array<const RowMatrix<Scalar>*, 8> tensors() const {
    return {&conv1.weight, &conv1.bias, &conv2.weight, &conv2.bias,
            &dense.weight, &dense.bias, &output.weight, &output.bias};
  }

  void set_zero() {
    for (auto* t : tensors()) t->setZero();
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out = ModelParams<Other>::zeros(arch);
    auto dst = out.tensors();
    auto src = tensors();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<Other>();
    out.version = version;
    return out;
  }
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
/// Convolution fans count every kernel tap.
template <typename Scalar>
ModelParams<Scalar> init_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams<Scalar> p = ModelParams<Scalar>::zeros(arch);
  Rng rng(seed);
  auto fill = [&](RowMatrix<Scalar>& w, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
  };
  fill(p.conv1.weight, double(arch.conv1_kernel), double(arch.conv1_filters * arch.conv1_kernel));
  fill(p.conv2.weight, double(arch.conv1_filters * arch.conv2_kernel),
       double(arch.conv2_filters * arch.conv2_kernel));
  fill(p.dense.weight, double(arch.flat_len()), double(arch.dense_units));
  fill(p.output.weight, double(arch.dense_units), double(arch.classes));
  return p;
}

/// Intermediate activations of one forward pass, channel-last per sample:
/// a (batch*len x channels) matrix holds len consecutive rows per sample.
template <typename Scalar>
struct ForwardCache {
  Index batch = 0;
  std::uint64_t model_version = 0;
  RowMatrix<Scalar> input;  // batch x input_len
  RowMatrix<Scalar> conv1, pool1, conv2, pool2;
  std::vector<std::uint8_t> pool1_arg, pool2_arg;
  RowMatrix<Scalar> hidden;  // batch x dense_units, post-ReLU
  RowMatrix<Scalar> probs;   // batch x classes
  // Backward-pass buffers, kept here so repeated passes reuse the storage.
  RowMatrix<Scalar> d_logits, d_hidden, d_flat, d_conv2, d_pool1, d_conv1, d_patch;
};

namespace detail {

template <typename Scalar>
using PatchMap = Eigen::Map<const RowMatrix<Scalar>, Eigen::Unaligned, Eigen::OuterStride<>>;

// Rows of a channel-last sample overlap as im2col patches: patch t starts at
// row t and spans kernel*in contiguous values.
template <typename Scalar>
PatchMap<Scalar> patches(const Scalar* sample, Index len_out, Index kernel, Index in) {
  return PatchMap<Scalar>(sample, len_out, kernel * in, Eigen::OuterStride<>(in));
}

template <typename Scalar>
void conv_relu_forward(const Conv1d<Scalar>& layer, const Scalar* x, Index batch, Index len_in,
                       RowMatrix<Scalar>& y) {
  const Index in = layer.in_channels;
  const Index len_out = len_in - layer.kernel + 1;
  y.resize(batch * len_out, layer.out_channels());
  for (Index b = 0; b < batch; ++b) {
    auto yb = y.middleRows(b * len_out, len_out);
    yb.noalias() = patches(x + b * len_in * in, len_out, layer.kernel, in) * layer.weight.transpose();
    yb.rowwise() += layer.bias.row(0);
  }
  y = y.cwiseMax(Scalar(0));
}

// dy is the gradient w.r.t. the post-ReLU output; it is masked in place.
template <typename Scalar>
void conv_relu_backward(const Conv1d<Scalar>& layer, const Scalar* x, Index batch, Index len_in,
                        const RowMatrix<Scalar>& y, RowMatrix<Scalar>& dy, Conv1d<Scalar>& grad,
                        RowMatrix<Scalar>* dx, RowMatrix<Scalar>& dpatch) {
  const Index in = layer.in_channels;
  const Index k = layer.kernel;
  const Index len_out = len_in - k + 1;
  dy = (y.array() > Scalar(0)).select(dy, Scalar(0));
  grad.bias.row(0) += dy.colwise().sum();
  if (dx) dx->setZero(batch * len_in, in);
  for (Index b = 0; b < batch; ++b) {
    const auto dyb = dy.middleRows(b * len_out, len_out);
    grad.weight.noalias() += dyb.transpose() * patches(x + b * len_in * in, len_out, k, in);
    if (dx) {
      dpatch.noalias() = dyb * layer.weight;
      auto dxb = dx->middleRows(b * len_in, len_in);
      for (Index j = 0; j < k; ++j) dxb.middleRows(j, len_out) += dpatch.middleCols(j * in, in);
    }
  }
}

template <typename Scalar>
void maxpool_forward(const RowMatrix<Scalar>& x, Index batch, Index len_in, Index width,
                     RowMatrix<Scalar>& y, std::vector<std::uint8_t>& arg) {
  const Index channels = x.cols();
  const Index len_out = len_in / width;
  y.resize(batch * len_out, channels);
  arg.resize(static_cast<std::size_t>(y.size()));
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < len_out; ++t) {
      const Scalar* src = x.data() + (b * len_in + t * width) * channels;
      const Index out_row = b * len_out + t;
      Scalar* dst = y.data() + out_row * channels;
      std::uint8_t* a = arg.data() + out_row * channels;
      for (Index c = 0; c < channels; ++c) {
        Scalar best = src[c];
        std::uint8_t best_j = 0;
        for (Index j = 1; j < width; ++j) {
          if (src[j * channels + c] > best) {
            best = src[j * channels + c];
            best_j = static_cast<std::uint8_t>(j);
          }
        }
        dst[c] = best;
        a[c] = best_j;
      }
    }
  }
}

template <typename Scalar>
void maxpool_backward(const Scalar* dy, const std::vector<std::uint8_t>& arg, Index batch,
                      Index len_in, Index width, Index channels, RowMatrix<Scalar>& dx) {
  const Index len_out = len_in / width;
  dx.setZero(batch * len_in, channels);
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < len_out; ++t) {
      const Index out_row = b * len_out + t;
      for (Index c = 0; c < channels; ++c) {
        const Index j = arg[static_cast<std::size_t>(out_row * channels + c)];
        dx(b * len_in + t * width + j, c) = dy[out_row * channels + c];
      }
    }
  }
}

template <typename Scalar>
void softmax_rows(RowMatrix<Scalar>& logits) {
  for (Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

}  // namespace detail

/// Class probabilities for a batch (rows = samples, cols = input_len) plus
/// everything backward() needs.
template <typename Scalar>
void forward_into(const ModelParams<Scalar>& model, const RowMatrix<Scalar>& batch, ForwardCache<Scalar>& c) {
  const Architecture& a = model.arch;
  if (batch.cols() != a.input_len) {
    throw ValidationError("input width " + std::to_string(batch.cols()) + " does not match model input " +
                          std::to_string(a.input_len));
  }
  if (!batch.allFinite()) throw NumericalError("non-finite values in model input");
  c.batch = batch.rows();
  c.model_version = model.version;
  c.input = batch;
  detail::conv_relu_forward(model.conv1, c.input.data(), c.batch, a.input_len, c.conv1);
  detail::maxpool_forward(c.conv1, c.batch, a.conv1_len(), a.pool, c.pool1, c.pool1_arg);
  detail::conv_relu_forward(model.conv2, c.pool1.data(), c.batch, a.pool1_len(), c.conv2);
  detail::maxpool_forward(c.conv2, c.batch, a.conv2_len(), a.pool, c.pool2, c.pool2_arg);
  // pool2 is (batch*len x channels) row-major, i.e. already batch x flat_len.
  const Eigen::Map<const RowMatrix<Scalar>> flat(c.pool2.data(), c.batch, a.flat_len());
  c.hidden.noalias() = flat * model.dense.weight.transpose();
  c.hidden.rowwise() += model.dense.bias.row(0);
  c.hidden = c.hidden.cwiseMax(Scalar(0));
  c.probs.noalias() = c.hidden * model.output.weight.transpose();
  c.probs.rowwise() += model.output.bias.row(0);
  detail::softmax_rows(c.probs);
}

/// Reuses the cache's storage when shapes repeat.
template <typename Scalar>
ForwardCache<Scalar> forward(const ModelParams<Scalar>& model, const RowMatrix<Scalar>& batch) {
  ForwardCache<Scalar> c;
  forward_into(model, batch, c);
  return c;
}

/// Mean categorical cross-entropy; probabilities are clamped to [1e-12, 1].
template <typename Scalar>
double cross_entropy(const RowMatrix<Scalar>& probs, const RowMatrix<Scalar>& onehot) {
  if (probs.rows() != onehot.rows() || probs.cols() != onehot.cols()) {
    throw ValidationError("cross entropy shape mismatch");
  }
  if (probs.rows() == 0) throw ValidationError("cross entropy of an empty batch");
  double total = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    for (Index k = 0; k < probs.cols(); ++k) {
      const double y = static_cast<double>(onehot(i, k));
      if (y != 0.0) {
        const double p = std::clamp(static_cast<double>(probs(i, k)), 1e-12, 1.0);
        total -= y * std::log(p);
      }
    }
  }
  return total / static_cast<double>(probs.rows());
}

/// Adds scale * d(sum of per-row losses)/d(params) into grads. With
/// scale = 1/batch this is the gradient of the mean loss; micro-batches of a
/// larger batch pass 1/total_rows and accumulate in a fixed order.
template <typename Scalar>
void accumulate_gradients(const ModelParams<Scalar>& model, ForwardCache<Scalar>& cache,
                          const RowMatrix<Scalar>& onehot, Scalar scale, ModelParams<Scalar>& grads) {
  if (cache.model_version != model.version) {
    throw ValidationError("stale forward cache: model changed since the forward pass");
  }
  if (onehot.rows() != cache.batch || onehot.cols() != model.arch.classes) {
    throw ValidationError("label batch does not match the forward cache");
  }
  const Architecture& a = model.arch;
  const Index batch = cache.batch;

  auto& dlogits = cache.d_logits;
  dlogits = (cache.probs - onehot) * scale;
  grads.output.weight.noalias() += dlogits.transpose() * cache.hidden;
  grads.output.bias.row(0) += dlogits.colwise().sum();

  auto& dhidden = cache.d_hidden;
  dhidden.noalias() = dlogits * model.output.weight;
  dhidden = (cache.hidden.array() > Scalar(0)).select(dhidden, Scalar(0));
  const Eigen::Map<const RowMatrix<Scalar>> flat(cache.pool2.data(), batch, a.flat_len());
  grads.dense.weight.noalias() += dhidden.transpose() * flat;
  grads.dense.bias.row(0) += dhidden.colwise().sum();

  cache.d_flat.noalias() = dhidden * model.dense.weight;
  detail::maxpool_backward(cache.d_flat.data(), cache.pool2_arg, batch, a.conv2_len(), a.pool,
                           a.conv2_filters, cache.d_conv2);
  detail::conv_relu_backward(model.conv2, cache.pool1.data(), batch, a.pool1_len(), cache.conv2,
                             cache.d_conv2, grads.conv2, &cache.d_pool1, cache.d_patch);
  detail::maxpool_backward(cache.d_pool1.data(), cache.pool1_arg, batch, a.conv1_len(), a.pool,
                           a.conv1_filters, cache.d_conv1);
  detail::conv_relu_backward<Scalar>(model.conv1, cache.input.data(), batch, a.input_len,
                                     cache.conv1, cache.d_conv1, grads.conv1, nullptr, cache.d_patch);
}

/// Exact gradient of the mean cross-entropy of the cached batch.
template <typename Scalar>
ModelParams<Scalar> backward(const ModelParams<Scalar>& model, ForwardCache<Scalar>& cache,
                             const RowMatrix<Scalar>& onehot) {
  ModelParams<Scalar> grads = ModelParams<Scalar>::zeros(model.arch);
  accumulate_gradients(model, cache, onehot, Scalar(1) / static_cast<Scalar>(cache.batch), grads);
  return grads;
}

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of a single tensor; t is the step count
/// after incrementing (t >= 1).
template <typename Derived>
void adam_update(Eigen::DenseBase<Derived>& param, const Eigen::DenseBase<Derived>& grad,
                 Eigen::DenseBase<Derived>& m, Eigen::DenseBase<Derived>& v, std::int64_t t,
                 const AdamHyper& h) {
  using Scalar = typename Derived::Scalar;
  const Scalar b1 = static_cast<Scalar>(h.beta1);
  const Scalar b2 = static_cast<Scalar>(h.beta2);
  m.derived() = b1 * m.derived().array() + (Scalar(1) - b1) * grad.derived().array();
  v.derived() = b2 * v.derived().array() + (Scalar(1) - b2) * grad.derived().array().square();
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(h.beta1, static_cast<double>(t)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(h.beta2, static_cast<double>(t)));
  param.derived() = param.derived().array() -
                    static_cast<Scalar>(h.learning_rate) * (m.derived().array() / c1) /
                        ((v.derived().array() / c2).sqrt() + static_cast<Scalar>(h.epsilon));
}

template <typename Scalar>
struct AdamState {
  ModelParams<Scalar> m, v;
  std::int64_t t = 0;
  AdamHyper hyper;

  static AdamState fresh(const Architecture& arch, const AdamHyper& hyper = {}) {
    return {ModelParams<Scalar>::zeros(arch), ModelParams<Scalar>::zeros(arch), 0, hyper};
  }
};

template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, AdamState<Scalar>& state) {
  if (!(params.arch == grads.arch) || !(params.arch == state.m.arch)) {
    throw ValidationError("adam step: parameter, gradient and state shapes differ");
  }
  ++state.t;
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    adam_update(*p[i], *g[i], *m[i], *v[i], state.t, state.hyper);
  }
  ++params.version;
}

/// argmax per row; ties resolve to the lowest class code.
template <typename Scalar>
std::vector<int> argmax_rows(const RowMatrix<Scalar>& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < probs.cols(); ++k) {
      if (probs(i, k) > probs(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization

struct ScalerStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<Index> floored_columns;  // zero-variance columns, std set to the floor
};

inline constexpr double kStdFloor = 1e-8;

/// Per-column mean and population standard deviation over the given rows
/// (all rows when `rows` is empty).
ScalerStats scaler_fit(const RowMatrixXd& data, std::span<const Index> rows = {});
RowMatrixXd scaler_transform(const RowMatrixXd& x, const ScalerStats& s);
RowMatrixXd scaler_inverse_transform(const RowMatrixXd& x, const ScalerStats& s);

// ---------------------------------------------------------------------------
// Training and inference over row subsets of an in-memory corpus.

/// Rows of a feature matrix, optionally standardized on the fly.
struct DataView {
  const RowMatrixXd* features = nullptr;
  const RowMatrixXd* onehot = nullptr;  // may be null for inference
  std::vector<Index> rows;              // empty = all rows in order
  const ScalerStats* scaler = nullptr;

  Index size() const { return rows.empty() ? features->rows() : static_cast<Index>(rows.size()); }
  Index row(Index i) const { return rows.empty() ? i : rows[static_cast<std::size_t>(i)]; }

  template <typename Scalar>
  RowMatrix<Scalar> gather_features(std::span<const Index> positions) const {
    RowMatrix<Scalar> out;
    gather_features_into(positions, out);
    return out;
  }

  template <typename Scalar>
  void gather_features_into(std::span<const Index> positions, RowMatrix<Scalar>& out) const {
    out.resize(static_cast<Index>(positions.size()), features->cols());
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const auto src = features->row(row(positions[i]));
      if (scaler) {
        out.row(static_cast<Index>(i)) =
            ((src.transpose() - scaler->mean).cwiseQuotient(scaler->std)).transpose().template cast<Scalar>();
      } else {
        out.row(static_cast<Index>(i)) = src.template cast<Scalar>();
      }
    }
  }

  template <typename Scalar>
  void gather_labels_into(std::span<const Index> positions, RowMatrix<Scalar>& out) const {
    out.resize(static_cast<Index>(positions.size()), onehot->cols());
    for (std::size_t i = 0; i < positions.size(); ++i) {
      out.row(static_cast<Index>(i)) = onehot->row(row(positions[i])).template cast<Scalar>();
    }
  }

  template <typename Scalar>
  RowMatrix<Scalar> gather_labels(std::span<const Index> positions) const {
    RowMatrix<Scalar> out;
    gather_labels_into(positions, out);
    return out;
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainOptions {
  std::size_t epochs = 3;
  std::size_t batch_size = 1000;
  AdamHyper adam;
  std::uint64_t seed = 0;
  /// Rows per forward/backward pass inside a batch; bounds activation memory
  /// without changing the batch gradient.
  Index micro_batch = 50;
  std::function<void(const EpochStats&)> on_epoch;
};

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> model;
  std::vector<EpochStats> history;
};

/// Mini-batch Adam on the mean cross-entropy. Row order is reshuffled every
/// epoch from the seed; the run is bit-reproducible for a given seed.
template <typename Scalar>
TrainResult<Scalar> train(const DataView& data, const Architecture& arch, const TrainOptions& opt) {
  if (!data.features || !data.onehot) throw ValidationError("training needs features and labels");
  if (data.features->rows() != data.onehot->rows()) {
    throw ValidationError("feature and label row counts differ");
  }
  if (data.size() == 0) throw ValidationError("cannot train on empty data");
  if (opt.batch_size == 0 || opt.micro_batch < 1) throw ValidationError("batch sizes must be >= 1");
  if (arch.input_len != data.features->cols()) {
    throw ValidationError("architecture input length does not match feature width");
  }

  TrainResult<Scalar> result{init_params<Scalar>(arch, derive_seed(opt.seed, 0)), {}};
  ModelParams<Scalar>& model = result.model;
  AdamState<Scalar> adam = AdamState<Scalar>::fresh(arch, opt.adam);
  ModelParams<Scalar> grads = ModelParams<Scalar>::zeros(arch);

  const Index n = data.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  RowMatrix<Scalar> x, y;
  ForwardCache<Scalar> cache;

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    Rng rng(derive_seed(opt.seed, 1, epoch));
    rng.shuffle(order);
    double loss_sum = 0.0;
    Index correct = 0;
    for (Index start = 0; start < n; start += static_cast<Index>(opt.batch_size)) {
      const Index batch = std::min<Index>(static_cast<Index>(opt.batch_size), n - start);
      grads.set_zero();
      const Scalar scale = Scalar(1) / static_cast<Scalar>(batch);
      for (Index off = 0; off < batch; off += opt.micro_batch) {
        const Index len = std::min(opt.micro_batch, batch - off);
        const std::span<const Index> pos(order.data() + start + off, static_cast<std::size_t>(len));
        data.gather_features_into(pos, x);
        data.gather_labels_into(pos, y);
        forward_into(model, x, cache);
        const double loss = cross_entropy(cache.probs, y);
        if (!std::isfinite(loss)) throw NumericalError("non-finite training loss");
        loss_sum += loss * static_cast<double>(len);
        const auto predicted = argmax_rows(cache.probs);
        for (Index i = 0; i < len; ++i) {
          if (y(i, predicted[static_cast<std::size_t>(i)]) > Scalar(0.5)) ++correct;
        }
        accumulate_gradients(model, cache, y, scale, grads);
      }
      adam_step(model, grads, adam);
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(n),
                     static_cast<double>(correct) / static_cast<double>(n)};
    result.history.push_back(stats);
    if (opt.on_epoch) opt.on_epoch(stats);
  }
  return result;
}

/// Class probabilities for every row of the view, computed in chunks.
template <typename Scalar>
RowMatrix<Scalar> predict_proba(const ModelParams<Scalar>& model, const DataView& data,
                                Index chunk = 256) {
  if (data.features->cols() != model.arch.input_len) {
    throw ValidationError("feature width " + std::to_string(data.features->cols()) +
                          " does not match model input " + std::to_string(model.arch.input_len));
  }
  const Index n = data.size();
  RowMatrix<Scalar> probs(n, model.arch.classes);
  std::vector<Index> pos;
  RowMatrix<Scalar> x;
  ForwardCache<Scalar> cache;
  for (Index start = 0; start < n; start += chunk) {
    const Index len = std::min(chunk, n - start);
    pos.resize(static_cast<std::size_t>(len));
    for (Index i = 0; i < len; ++i) pos[static_cast<std::size_t>(i)] = start + i;
    data.gather_features_into(pos, x);
    forward_into(model, x, cache);
    probs.middleRows(start, len) = cache.probs;
  }
  return probs;
}

template <typename Scalar>
std::vector<int> predict(const ModelParams<Scalar>& model, const DataView& data) {
  return argmax_rows(predict_proba(model, data));
}

}  // namespace neurofuse::nn

#include "infoprobe/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"

namespace infoprobe::nn {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr std::size_t kEvalChunk = 4096;

void row_log_softmax(Matrix& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    z.row(i).array() -= lse;
  }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

struct AdamState {
  Matrix m;
  Matrix v;
};

struct AdamVecState {
  Vector m;
  Vector v;
};

}  // namespace

void validate(const ProbeConfig& config) {
  if (config.layers < 1) {
    throw InvalidArgument(fmt::format("probe needs at least one layer, got {}", config.layers));
  }
  if (config.base_width < 1) {
    throw InvalidArgument(fmt::format("base width must be >= 1, got {}", config.base_width));
  }
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0)) {
    throw InvalidArgument(fmt::format("dropout rate must be in [0, 1), got {}", config.dropout_rate));
  }
  if (config.onehot_dim < 1) {
    throw InvalidArgument(fmt::format("one-hot dim must be >= 1, got {}", config.onehot_dim));
  }
}

std::vector<std::size_t> hidden_widths(int layers, int base_width, std::size_t width_floor) {
  std::vector<std::size_t> widths;
  for (int i = 1; i < layers; ++i) {
    const auto halved = static_cast<std::size_t>(base_width) >> std::min(i - 1, 62);
    widths.push_back(std::max(halved, width_floor));
  }
  return widths;
}

Probe::Probe(std::vector<Layer> layers, double dropout_rate, std::uint64_t seed)
    : layers_(std::move(layers)), dropout_rate_(dropout_rate), dropout_rng_(mix_seed(seed, 0xD50)) {
  if (layers_.empty()) {
    throw ShapeError("probe has no layers");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows()) {
      throw ShapeError(fmt::format("layer {}: bias has {} entries for {} outputs", i, l.bias.size(), l.weight.rows()));
    }
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) {
      throw ShapeError(fmt::format("layer {} expects {} inputs but layer {} emits {}", i, l.weight.cols(), i - 1,
                                   layers_[i - 1].weight.rows()));
    }
  }
}

std::size_t Probe::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

void Probe::check_input(const Matrix& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != input_dim()) {
    throw ShapeError(fmt::format("probe expects inputs of dim {}, got {}", input_dim(), inputs.cols()));
  }
}

Probe::Trace Probe::run(const Matrix& inputs, bool dropout) {
  check_input(inputs);
  Trace t;
  const bool apply = dropout && dropout_rate_ > 0.0;
  const double keep_scale = 1.0 / (1.0 - dropout_rate_);
  Matrix a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = a * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    t.activations.push_back(std::move(a));
    if (l + 1 == layers_.size()) {
      row_log_softmax(z);
      t.log_probs = std::move(z);
      break;
    }
    a = z.cwiseMax(0.0);
    t.pre_relu.push_back(std::move(z));
    if (apply) {
      Matrix mask(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = uniform01(dropout_rng_) < dropout_rate_ ? 0.0 : keep_scale;
      }
      a = a.cwiseProduct(mask);
      t.masks.push_back(std::move(mask));
    } else {
      t.masks.emplace_back();
    }
  }
  return t;
}

Matrix Probe::forward(const Matrix& inputs) {
  return run(inputs, mode_ == Mode::train).log_probs;
}

Matrix Probe::log_probs(const Matrix& inputs) const {
  check_input(inputs);
  Matrix a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = a * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    if (l + 1 == layers_.size()) {
      row_log_softmax(z);
      return z;
    }
    a = z.cwiseMax(0.0);
  }
  return a;
}

LossAndGrads Probe::loss_and_grads(const Batch& batch) {
  const auto n = static_cast<Eigen::Index>(batch.labels.size());
  if (n == 0) {
    throw InvalidArgument("loss_and_grads on an empty batch");
  }
  if (batch.inputs.rows() != n) {
    throw ShapeError(fmt::format("batch has {} inputs but {} labels", batch.inputs.rows(), n));
  }
  for (const int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes()) {
      throw ShapeError(fmt::format("label {} outside [0, {})", y, num_classes()));
    }
  }
  auto t = run(batch.inputs, mode_ == Mode::train);

  LossAndGrads out;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss -= t.log_probs(i, batch.labels[static_cast<std::size_t>(i)]);
  }
  // Gradients are taken of the loss in bits: scale the nats gradient by 1/ln 2.
  const double scale = 1.0 / (static_cast<double>(n) * kLn2);
  out.loss_bits = loss / static_cast<double>(n) / kLn2;

  Matrix delta = t.log_probs.array().exp();
  for (Eigen::Index i = 0; i < n; ++i) {
    delta(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  delta *= scale;

  const auto m = layers_.size();
  out.grads.weights.resize(m);
  out.grads.biases.resize(m);
  for (std::size_t l = m; l-- > 0;) {
    out.grads.weights[l] = delta.transpose() * t.activations[l];
    out.grads.biases[l] = delta.colwise().sum().transpose();
    Matrix upstream = delta * layers_[l].weight;
    if (l == 0) {
      out.grads.inputs = std::move(upstream);
      break;
    }
    const auto& mask = t.masks[l - 1];
    if (mask.size() != 0) {
      upstream = upstream.cwiseProduct(mask);
    }
    delta = upstream.cwiseProduct((t.pre_relu[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return out;
}

Probe init_probe(const ProbeConfig& config, std::size_t input_dim, std::size_t num_classes, std::uint64_t seed) {
  validate(config);
  if (input_dim < 1) {
    throw InvalidArgument("probe input dim must be >= 1");
  }
  if (num_classes < 2) {
    throw InvalidArgument(fmt::format("probe needs at least 2 classes, got {}", num_classes));
  }
  std::vector<std::size_t> dims{input_dim};
  for (const auto w : hidden_widths(config.layers, config.base_width, num_classes)) {
    dims.push_back(w);
  }
  dims.push_back(num_classes);

  Rng rng(mix_seed(seed, 0x1A1));
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto fan_in = dims[l];
    const auto fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Matrix(fan_out, fan_in), Vector::Zero(static_cast<Eigen::Index>(fan_out))};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = uniform(rng, -bound, bound);
    }
    layers.push_back(std::move(layer));
  }
  return Probe(std::move(layers), config.dropout_rate, seed);
}

void validate(const Examples& examples) {
  if (!examples.features) {
    throw InvalidArgument("examples have no feature matrix");
  }
  if (examples.slots == 0 || examples.rows.size() != examples.labels.size() * examples.slots) {
    throw ShapeError(fmt::format("examples hold {} row references for {} labels with {} slots",
                                 examples.rows.size(), examples.labels.size(), examples.slots));
  }
  const auto nrows = static_cast<std::size_t>(examples.features->rows());
  for (const auto r : examples.rows) {
    if (r >= nrows) {
      throw ShapeError(fmt::format("row reference {} outside feature matrix with {} rows", r, nrows));
    }
  }
}

Batch gather(const Matrix& features, const Examples& examples, std::span<const std::size_t> indices) {
  const auto dim = features.cols();
  const auto slots = examples.slots;
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(indices.size()), dim * static_cast<Eigen::Index>(slots));
  b.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto i = indices[k];
    for (std::size_t s = 0; s < slots; ++s) {
      b.inputs.block(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s) * dim, 1, dim) =
          features.row(static_cast<Eigen::Index>(examples.rows[i * slots + s]));
    }
    b.labels.push_back(examples.labels[i]);
  }
  return b;
}

Batch gather_all(const Matrix& features, const Examples& examples) {
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return gather(features, examples, idx);
}

Matrix model_log_probs(const Model& model, const Examples& examples) {
  const auto& features = model.features_for(examples);
  Matrix out(static_cast<Eigen::Index>(examples.size()), static_cast<Eigen::Index>(model.probe.num_classes()));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < examples.size(); start += kEvalChunk) {
    const auto end = std::min(examples.size(), start + kEvalChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto batch = gather(features, examples, idx);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
        model.probe.log_probs(batch.inputs);
  }
  return out;
}

double mean_cross_entropy_bits(const Model& model, const Examples& examples) {
  if (examples.size() == 0) {
    throw InvalidArgument("cross-entropy over an empty dataset");
  }
  const auto lp = model_log_probs(model, examples);
  double total = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    total -= lp(static_cast<Eigen::Index>(i), examples.labels[i]);
  }
  return total / static_cast<double>(examples.size()) / kLn2;
}

TrainResult train(Probe probe, std::optional<Matrix> embedding, const Examples& train_set,
                  const Examples& dev_set, const TrainSettings& settings, std::uint64_t seed) {
  if (train_set.size() == 0 || dev_set.size() == 0) {
    throw InvalidArgument("training needs non-empty train and dev sets");
  }
  if (settings.batch_size == 0 || settings.max_epochs == 0) {
    throw InvalidArgument("batch size and epoch cap must be positive");
  }
  validate(train_set);
  validate(dev_set);

  const auto nl = probe.layer_count();
  std::vector<AdamState> w_state(nl);
  std::vector<AdamVecState> b_state(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& layer = probe.layers()[l];
    w_state[l] = {Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                  Matrix::Zero(layer.weight.rows(), layer.weight.cols())};
    b_state[l] = {Vector::Zero(layer.bias.size()), Vector::Zero(layer.bias.size())};
  }
  AdamState e_state;
  if (embedding) {
    e_state = {Matrix::Zero(embedding->rows(), embedding->cols()), Matrix::Zero(embedding->rows(), embedding->cols())};
  }

  TrainResult result{Model{probe, embedding}, {}, {}, 0, false};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::uint64_t step = 0;
  Rng shuffle_rng(mix_seed(seed, 0x5F1));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<char> touched;

  for (std::size_t epoch = 0; epoch < settings.max_epochs; ++epoch) {
    probe.set_mode(Mode::train);
    shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += settings.batch_size) {
      const auto end = std::min(order.size(), start + settings.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix& features = embedding ? *embedding : *train_set.features;
      auto lg = probe.loss_and_grads(gather(features, train_set, idx));
      if (!std::isfinite(lg.loss_bits)) {
        result.diverged = true;
        break;
      }
      epoch_loss += lg.loss_bits * static_cast<double>(idx.size());
      seen += idx.size();

      ++step;
      const double c1 = 1.0 - std::pow(settings.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(settings.beta2, static_cast<double>(step));
      const double lr = settings.learning_rate;
      auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = settings.beta1 * m + (1.0 - settings.beta1) * g;
        v = settings.beta2 * v + (1.0 - settings.beta2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + settings.epsilon);
      };
      for (std::size_t l = 0; l < nl; ++l) {
        auto& layer = probe.layers()[l];
        adam(layer.weight, w_state[l].m, w_state[l].v, lg.grads.weights[l]);
        adam(layer.bias, b_state[l].m, b_state[l].v, lg.grads.biases[l]);
      }
      if (embedding) {
        // Scatter-add the input gradient into table rows, then update only
        // the rows this batch touched (lazy Adam).
        const auto dim = embedding->cols();
        Matrix g = Matrix::Zero(embedding->rows(), dim);
        touched.assign(static_cast<std::size_t>(embedding->rows()), 0);
        for (std::size_t k = 0; k < idx.size(); ++k) {
          for (std::size_t s = 0; s < train_set.slots; ++s) {
            const auto r = train_set.rows[idx[k] * train_set.slots + s];
            g.row(static_cast<Eigen::Index>(r)) +=
                lg.grads.inputs.block(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s) * dim, 1, dim);
            touched[r] = 1;
          }
        }
        for (std::size_t r = 0; r < touched.size(); ++r) {
          if (!touched[r]) continue;
          const auto ri = static_cast<Eigen::Index>(r);
          auto p = embedding->row(ri);
          auto m = e_state.m.row(ri);
          auto v = e_state.v.row(ri);
          const RowVector gr = g.row(ri);
          m = settings.beta1 * m + (1.0 - settings.beta1) * gr;
          v = settings.beta2 * v + (1.0 - settings.beta2) * gr.cwiseProduct(gr);
          p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + settings.epsilon);
        }
      }
    }
    if (result.diverged) {
      break;
    }

    probe.set_mode(Mode::eval);
    const Model current{probe, embedding};
    const double dev = mean_cross_entropy_bits(current, dev_set);
    bool finite = std::isfinite(dev);
    for (const auto& l : probe.layers()) {
      finite = finite && all_finite(l.weight) && l.bias.allFinite();
    }
    if (!finite) {
      result.diverged = true;
      break;
    }
    result.train_ce.push_back(epoch_loss / static_cast<double>(seen));
    result.dev_ce.push_back(dev);
    if (dev < best) {
      best = dev;
      result.best_epoch = epoch;
      result.model = current;
      since_best = 0;
    } else if (++since_best >= settings.patience) {
      break;
    }
  }
  result.model.probe.set_mode(Mode::eval);
  return result;
}

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw FormatError("probe checkpoint: truncated");
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_f64(std::string& out, double v) { put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }

}  // namespace

std::string encode_model(const Model& model) {
  std::string out("PPRB");
  put_le<std::uint32_t>(out, 1);
  const auto& layers = model.probe.layers();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
  put_f64(out, model.probe.dropout_rate());
  for (const auto& l : layers) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
  }
  put_le<std::uint32_t>(out, model.embedding ? 1 : 0);
  if (model.embedding) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.embedding->rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.embedding->cols()));
  }
  for (const auto& l : layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) put_f64(out, l.weight.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) put_f64(out, l.bias[i]);
  }
  if (model.embedding) {
    for (Eigen::Index i = 0; i < model.embedding->size(); ++i) put_f64(out, model.embedding->data()[i]);
  }
  return out;
}

Model decode_model(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "PPRB", 4) != 0) {
    throw FormatError("probe checkpoint: bad magic");
  }
  Reader r(bytes.substr(4));
  if (const auto version = r.get<std::uint32_t>(); version != 1) {
    throw FormatError(fmt::format("probe checkpoint: unsupported version {}", version));
  }
  const auto nl = r.get<std::uint32_t>();
  const double dropout = r.get_f64();
  std::vector<Layer> layers(nl);
  for (auto& l : layers) {
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    l.weight.resize(rows, cols);
    l.bias.resize(rows);
  }
  std::optional<Matrix> embedding;
  if (r.get<std::uint32_t>() != 0) {
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    embedding.emplace(rows, cols);
  }
  for (auto& l : layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = r.get_f64();
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = r.get_f64();
  }
  if (embedding) {
    for (Eigen::Index i = 0; i < embedding->size(); ++i) embedding->data()[i] = r.get_f64();
  }
  if (!r.done()) {
    throw FormatError("probe checkpoint: trailing bytes");
  }
  Model m{Probe(std::move(layers), dropout, 0), std::move(embedding)};
  m.probe.set_mode(Mode::eval);
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(fmt::format("failed to write '{}'", path.string()));
  }
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_model(buffer.str());
}

}  // namespace infoprobe::nn

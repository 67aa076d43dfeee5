#include "iovfl/fl_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace iovfl::fl {

std::vector<int> ModelParams::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(static_cast<int>(layers.front().rows()) - 1);
  for (const auto& m : layers) w.push_back(static_cast<int>(m.cols()));
  return w;
}

bool ModelParams::same_shape(const ModelParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (layers[l].rows() != other.layers[l].rows() || layers[l].cols() != other.layers[l].cols()) return false;
  return true;
}

void AdamConfig::validate() const {
  if (!(beta_p >= 0.0 && beta_p < 1.0) || !(beta_q >= 0.0 && beta_q < 1.0))
    throw std::invalid_argument("adam: betas must lie in [0,1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam: epsilon must be positive");
  if (!(kappa0 >= 0.0)) throw std::invalid_argument("adam: step size must be non-negative");
}

AdamState AdamState::fresh(const ModelParams& model, const AdamConfig& config) {
  config.validate();
  AdamState s;
  s.config = config;
  for (const auto& w : model.layers) {
    s.p.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    s.q.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  return s;
}

FeatureEncoder::FeatureEncoder(int num_locations, const ingest::AccidentSchema& schema)
    : num_locations_(num_locations),
      num_light_(static_cast<int>(schema.light_vocab.size())),
      num_weather_(static_cast<int>(schema.weather_vocab.size())),
      num_surface_(static_cast<int>(schema.surface_vocab.size())) {
  if (num_locations < 1) throw std::invalid_argument("encoder: need at least one location");
  width_ = num_locations_ + ingest::kNumDayCategories + ingest::kNumHourCategories + num_light_ + num_weather_ +
           num_surface_;
}

DataShard FeatureEncoder::encode(std::span<const ingest::AccidentRecord> records) const {
  std::vector<int> rows(records.size());
  std::iota(rows.begin(), rows.end(), 0);
  return encode(records, rows);
}

DataShard FeatureEncoder::encode(std::span<const ingest::AccidentRecord> records, std::span<const int> rows) const {
  DataShard s;
  const auto n = static_cast<Eigen::Index>(rows.size());
  s.features = Eigen::MatrixXd::Zero(n, width_);
  s.labels = Eigen::MatrixXd::Zero(n, kNumClasses);
  const int off_day = num_locations_;
  const int off_hour = off_day + ingest::kNumDayCategories;
  const int off_light = off_hour + ingest::kNumHourCategories;
  const int off_weather = off_light + num_light_;
  const int off_surface = off_weather + num_weather_;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
    if (r.location_id < 1 || r.location_id > num_locations_)
      throw std::invalid_argument("encoder: location_id " + std::to_string(r.location_id) + " outside 1.." +
                                  std::to_string(num_locations_));
    s.features(i, r.location_id - 1) = 1.0;
    s.features(i, off_day + r.day_category - 1) = 1.0;
    s.features(i, off_hour + r.hour_category) = 1.0;
    s.features(i, off_light + r.light) = 1.0;
    s.features(i, off_weather + r.weather) = 1.0;
    s.features(i, off_surface + r.road_surface) = 1.0;
    s.labels(i, r.severity) = 1.0;
  }
  return s;
}

ModelParams init_model(const std::vector<int>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("init_model: need input and output widths");
  if (widths.back() != kNumClasses) throw std::invalid_argument("init_model: last width must be 3");
  for (const int w : widths)
    if (w < 1) throw std::invalid_argument("init_model: zero-width layer");
  std::mt19937_64 rng(seed);
  ModelParams m;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    std::uniform_real_distribution<double> dist(-scale, scale);
    Eigen::MatrixXd w(widths[l] + 1, widths[l + 1]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    m.layers.push_back(std::move(w));
  }
  return m;
}

namespace {

Eigen::MatrixXd affine(const Eigen::MatrixXd& a, const Eigen::MatrixXd& w) {
  const Eigen::Index in = w.rows() - 1;
  Eigen::MatrixXd z = a * w.topRows(in);
  z.rowwise() += w.row(in);
  return z;
}

}  // namespace

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  const Eigen::VectorXd sums = out.rowwise().sum();
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= sums(i);
  return out;
}

ForwardPass forward(const ModelParams& model, const Eigen::MatrixXd& features) {
  if (model.layers.empty()) throw std::invalid_argument("forward: empty model");
  if (features.cols() != model.layers.front().rows() - 1)
    throw std::invalid_argument("forward: feature width " + std::to_string(features.cols()) + " != model input " +
                                std::to_string(model.layers.front().rows() - 1));
  ForwardPass fp;
  fp.activations.push_back(features);
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l)
    fp.activations.push_back(affine(fp.activations.back(), model.layers[l]).array().tanh().matrix());
  fp.outputs = softmax_rows(affine(fp.activations.back(), model.layers.back()));
  return fp;
}

double local_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& labels, double eta) {
  if (outputs.rows() != labels.rows() || outputs.cols() != labels.cols())
    throw std::invalid_argument("local_loss: shape mismatch");
  if (!(eta > 0.0)) throw std::invalid_argument("local_loss: eta must be positive");
  return (labels - outputs).squaredNorm() / eta;
}

double shard_loss(const ModelParams& model, const DataShard& shard) {
  return local_loss(forward(model, shard.features).outputs, shard.labels, shard.size());
}

std::vector<Eigen::MatrixXd> gradient(const ModelParams& model, const DataShard& shard) {
  if (shard.size() == 0) throw std::invalid_argument("gradient: empty shard");
  const ForwardPass fp = forward(model, shard.features);
  const auto L = model.layers.size();
  std::vector<Eigen::MatrixXd> grads(L);

  const Eigen::MatrixXd d_out = (2.0 / shard.size()) * (fp.outputs - shard.labels);
  const Eigen::VectorXd inner = (d_out.array() * fp.outputs.array()).rowwise().sum();
  Eigen::MatrixXd dz = fp.outputs.array() * (d_out.colwise() - inner).array();

  for (std::size_t l = L; l-- > 0;) {
    const Eigen::MatrixXd& a = fp.activations[l];
    const auto& w = model.layers[l];
    const Eigen::Index in = w.rows() - 1;
    grads[l].resize(w.rows(), w.cols());
    grads[l].topRows(in) = a.transpose() * dz;
    grads[l].row(in) = dz.colwise().sum();
    if (l == 0) break;
    const Eigen::MatrixXd da = dz * w.topRows(in).transpose();
    dz = da.array() * (1.0 - a.array().square());
  }
  return grads;
}

void adam_step(AdamState& state, const std::vector<Eigen::MatrixXd>& grads, ModelParams& model) {
  if (grads.size() != model.layers.size() || state.p.size() != model.layers.size())
    throw std::invalid_argument("adam_step: layer count mismatch");
  const auto& c = state.config;
  const double t = static_cast<double>(state.tau + 1);
  state.kappa = c.kappa0 * std::sqrt(1.0 - std::pow(c.beta_q, t)) / (1.0 - std::pow(c.beta_p, t));
  for (std::size_t l = 0; l < grads.size(); ++l) {
    state.p[l] = c.beta_p * state.p[l] + (1.0 - c.beta_p) * grads[l];
    state.q[l] = c.beta_q * state.q[l] + (1.0 - c.beta_q) * grads[l].cwiseProduct(grads[l]);
    model.layers[l].array() -= state.kappa * state.p[l].array() / (state.q[l].array().sqrt() + c.epsilon);
  }
  ++state.tau;
}

LocalTrainResult local_train(const ModelParams& global, const DataShard& shard, const AdamConfig& adam, int tau_th,
                             int batch_size, std::uint64_t seed) {
  if (tau_th < 0) throw std::invalid_argument("local_train: tau_th must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("local_train: batch size must be >= 1");
  LocalTrainResult res{global, 0};
  if (tau_th == 0) return res;
  if (shard.size() == 0) throw std::invalid_argument("local_train: empty shard");

  AdamState state = AdamState::fresh(global, adam);
  const int n = shard.size();
  const bool full = batch_size >= n;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  int cursor = n;
  for (int step = 0; step < tau_th; ++step) {
    if (full) {
      adam_step(state, gradient(res.model, shard), res.model);
    } else {
      if (cursor + batch_size > n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      DataShard batch;
      batch.features.resize(batch_size, shard.features.cols());
      batch.labels.resize(batch_size, shard.labels.cols());
      for (int i = 0; i < batch_size; ++i) {
        batch.features.row(i) = shard.features.row(order[static_cast<std::size_t>(cursor + i)]);
        batch.labels.row(i) = shard.labels.row(order[static_cast<std::size_t>(cursor + i)]);
      }
      cursor += batch_size;
      adam_step(state, gradient(res.model, batch), res.model);
    }
    ++res.adam_steps;
  }
  return res;
}

ModelParams fed_avg(std::span<const ModelParams> models, std::span<const double> eta) {
  if (models.empty()) throw std::invalid_argument("fed_avg: no models");
  if (models.size() != eta.size()) throw std::invalid_argument("fed_avg: one weight per model required");
  double total = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!(eta[i] > 0.0)) throw std::invalid_argument("fed_avg: sample counts must be positive");
    if (!models[i].same_shape(models[0])) throw std::invalid_argument("fed_avg: shape mismatch");
    total += eta[i];
  }
  if (models.size() == 1) return models[0];
  ModelParams out = models[0];
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    out.layers[l].setZero();
    for (std::size_t i = 0; i < models.size(); ++i) out.layers[l] += eta[i] * models[i].layers[l];
    out.layers[l] /= total;
  }
  return out;
}

double global_loss(std::span<const double> local_losses) {
  if (local_losses.empty()) throw std::invalid_argument("global_loss: no losses");
  return std::accumulate(local_losses.begin(), local_losses.end(), 0.0) / static_cast<double>(local_losses.size());
}

double accuracy(const ModelParams& model, const DataShard& shard) {
  if (shard.size() == 0) return 0.0;
  const Eigen::MatrixXd out = forward(model, shard.features).outputs;
  int hits = 0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Eigen::Index pred = 0, truth = 0;
    out.row(i).maxCoeff(&pred);
    shard.labels.row(i).maxCoeff(&truth);
    hits += pred == truth;
  }
  return static_cast<double>(hits) / shard.size();
}

double TierWeights::of(selection::Tier t) const {
  switch (t) {
    case selection::Tier::high: return high;
    case selection::Tier::medium: return medium;
    case selection::Tier::low: return low;
  }
  return 0.0;
}

namespace {

// Largest-remainder split of `total` items by weight; ties to the lower index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& w) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> out(w.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = sum > 0.0 ? static_cast<double>(total) * w[i] / sum : 0.0;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++out[rem[k % rem.size()].second];
  return out;
}

}  // namespace

std::vector<std::vector<int>> partition_data(std::span<const int> labels, std::span<const selection::Tier> tiers,
                                             PartitionMode mode, std::uint64_t seed, const TierWeights& weights,
                                             int pieces_per_sv) {
  if (labels.empty()) throw std::invalid_argument("partition_data: empty dataset");
  if (pieces_per_sv < 1) throw std::invalid_argument("partition_data: pieces_per_sv must be >= 1");
  if (tiers.size() > labels.size()) throw std::invalid_argument("partition_data: more vehicles than samples");
  for (const auto t : tiers)
    if (!(weights.of(t) > 0.0)) throw std::invalid_argument("partition_data: tier weights must be positive");

  std::vector<int> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<int>> shards(tiers.size());
  // Cuts `pool` in order into one piece per slot; slot k belongs to owner[k].
  auto cut = [&](std::span<const int> pool, const std::vector<std::size_t>& owner) {
    std::vector<double> w;
    for (const auto i : owner) w.push_back(weights.of(tiers[i]));
    const auto sizes = apportion(pool.size(), w);
    std::size_t at = 0;
    for (std::size_t k = 0; k < owner.size(); ++k) {
      shards[owner[k]].insert(shards[owner[k]].end(), pool.begin() + static_cast<std::ptrdiff_t>(at),
                              pool.begin() + static_cast<std::ptrdiff_t>(at + sizes[k]));
      at += sizes[k];
    }
  };

  if (mode == PartitionMode::iid) {
    std::vector<std::size_t> all(tiers.size());
    std::iota(all.begin(), all.end(), 0);
    cut(order, all);
    return shards;
  }

  const selection::Tier kinds[] = {selection::Tier::high, selection::Tier::medium, selection::Tier::low};
  std::vector<std::vector<std::size_t>> members(3);
  std::vector<double> tier_weight(3, 0.0);
  for (std::size_t i = 0; i < tiers.size(); ++i)
    for (std::size_t k = 0; k < 3; ++k)
      if (tiers[i] == kinds[k]) {
        members[k].push_back(i);
        tier_weight[k] += weights.of(tiers[i]);
      }
  const auto subset_sizes = apportion(order.size(), tier_weight);
  std::size_t at = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<int> pool(order.begin() + static_cast<std::ptrdiff_t>(at),
                          order.begin() + static_cast<std::ptrdiff_t>(at + subset_sizes[k]));
    at += subset_sizes[k];
    std::stable_sort(pool.begin(), pool.end(), [&](int x, int y) {
      return labels[static_cast<std::size_t>(x)] < labels[static_cast<std::size_t>(y)];
    });
    if (members[k].empty()) continue;
    std::vector<std::size_t> owner;
    for (int piece = 0; piece < pieces_per_sv; ++piece) owner.insert(owner.end(), members[k].begin(), members[k].end());
    if (pieces_per_sv > 1) std::shuffle(owner.begin(), owner.end(), rng);
    cut(pool, owner);
  }
  return shards;
}

void write_checkpoint(std::ostream& out, const ModelParams& model) {
  out << "iovfl-model 1\nlayers " << model.layers.size() << '\n';
  char buf[32];
  for (const auto& w : model.layers) {
    out << "layer " << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", w(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write_checkpoint: stream error");
}

ModelParams read_checkpoint(std::istream& in) {
  std::string tag;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> tag >> version) || tag != "iovfl-model" || version != 1)
    throw std::runtime_error("read_checkpoint: not an iovfl-model v1 file");
  if (!(in >> tag >> count) || tag != "layers") throw std::runtime_error("read_checkpoint: missing layer count");
  ModelParams m;
  for (std::size_t l = 0; l < count; ++l) {
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> rows >> cols) || tag != "layer" || rows < 1 || cols < 1)
      throw std::runtime_error("read_checkpoint: bad layer header");
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(in >> w(r, c))) throw std::runtime_error("read_checkpoint: truncated weights");
    m.layers.push_back(std::move(w));
  }
  return m;
}

}  // namespace iovfl::fl

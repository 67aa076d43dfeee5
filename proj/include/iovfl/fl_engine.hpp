#pragma once

// Multilayer perceptron (tanh hidden layers, softmax output, squared error
// against one-hot labels), Adam, local training, and sample-weighted
// averaging of client models.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "iovfl/ingestion.hpp"
#include "iovfl/sv_selection.hpp"

namespace iovfl::fl {

inline constexpr int kNumClasses = ingest::kNumSeverities;

/// Layer l maps width w_l to w_{l+1} through a (w_l + 1) x w_{l+1} matrix
/// whose last row is the bias (the input gets a constant 1 column).
struct ModelParams {
  std::vector<Eigen::MatrixXd> layers;

  std::vector<int> widths() const;
  bool same_shape(const ModelParams& other) const;
};

struct AdamConfig {
  double kappa0 = 0.01;
  double beta_p = 0.9;
  double beta_q = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  AdamConfig config;
  std::vector<Eigen::MatrixXd> p;  // first moment, one per layer
  std::vector<Eigen::MatrixXd> q;  // second moment
  long tau = 0;                    // steps taken
  double kappa = 0.0;              // step size used by the last step

  static AdamState fresh(const ModelParams& model, const AdamConfig& config);
};

struct DataShard {
  Eigen::MatrixXd features;  // eta x F
  Eigen::MatrixXd labels;    // eta x 3, one-hot
  int size() const { return static_cast<int>(features.rows()); }
};

/// One-hot over location, day, hour, light, weather and road surface.
class FeatureEncoder {
 public:
  FeatureEncoder(int num_locations, const ingest::AccidentSchema& schema = {});

  int width() const { return width_; }
  DataShard encode(std::span<const ingest::AccidentRecord> records) const;
  DataShard encode(std::span<const ingest::AccidentRecord> records, std::span<const int> rows) const;

 private:
  int num_locations_;
  int num_light_, num_weather_, num_surface_;
  int width_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; widths must end in 3.
ModelParams init_model(const std::vector<int>& widths, std::uint64_t seed);

struct ForwardPass {
  std::vector<Eigen::MatrixXd> activations;  // input, then each hidden layer output
  Eigen::MatrixXd outputs;                   // softmax probabilities
};

ForwardPass forward(const ModelParams& model, const Eigen::MatrixXd& features);
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// (1/eta) * |G - G_hat|_F^2.
double local_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& labels, double eta);
double shard_loss(const ModelParams& model, const DataShard& shard);

/// Exact gradient of shard_loss with respect to every layer matrix.
std::vector<Eigen::MatrixXd> gradient(const ModelParams& model, const DataShard& shard);

/// One Adam update in place; tau advances by one.
void adam_step(AdamState& state, const std::vector<Eigen::MatrixXd>& grads, ModelParams& model);

struct LocalTrainResult {
  ModelParams model;
  int adam_steps = 0;
};

/// tau_th Adam steps on consecutive mini-batches of a seeded shuffle of the
/// shard, starting from fresh moments.
LocalTrainResult local_train(const ModelParams& global, const DataShard& shard, const AdamConfig& adam, int tau_th,
                             int batch_size, std::uint64_t seed);

/// sum_n eta_n W_n / sum_n eta_n.
ModelParams fed_avg(std::span<const ModelParams> models, std::span<const double> eta);

/// Mean of the local losses.
double global_loss(std::span<const double> local_losses);

/// Fraction of rows whose argmax matches the label's.
double accuracy(const ModelParams& model, const DataShard& shard);

enum class PartitionMode { iid, noniid };

struct TierWeights {
  double high = 3.0;
  double medium = 2.0;
  double low = 1.0;
  double of(selection::Tier t) const;
};

/// Row indices per vehicle. iid: a seeded shuffle cut into pieces sized by
/// tier weight. noniid: the shuffle is cut into one subset per tier, each
/// subset is sorted by label and cut into contiguous pieces, `pieces_per_sv`
/// per vehicle. With more than one piece the pieces are dealt out in a
/// seeded order, so a vehicle holds a few label runs rather than one.
std::vector<std::vector<int>> partition_data(std::span<const int> labels, std::span<const selection::Tier> tiers,
                                             PartitionMode mode, std::uint64_t seed, const TierWeights& weights = {},
                                             int pieces_per_sv = 1);

/// Text format: "iovfl-model 1", "layers <count>", then per layer
/// "layer <rows> <cols>" followed by rows of %.17g values.
void write_checkpoint(std::ostream& out, const ModelParams& model);
ModelParams read_checkpoint(std::istream& in);

}  // namespace iovfl::fl

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "credtext/mlp.hpp"
#include "credtext/tabular.hpp"
#include "credtext/textfeat.hpp"

namespace credtext {

enum class Variant { Structured, Text, Combined };

std::string_view variant_name(Variant v) noexcept;
Variant parse_variant(std::string_view name);

/// Horizontal concatenation of the declared sources, aligned by record id to
/// the first source's order. Combined = structured columns, then text columns.
EncodedMatrix assemble(Variant variant, const EncodedMatrix* structured, std::span<const FeatureBlock> texts);

enum class Optimizer { Adam, Sgd };

struct MlpConfig {
  std::vector<int> hidden = {64};  // empty: logistic regression
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;

  void validate() const;
  bool operator==(const MlpConfig&) const = default;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  // 0-based
  double final_val_loss = 0.0;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

/// Mean binary cross-entropy of probabilities, clamped 1e-12 from the boundary.
double bce_loss(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& p);

/// Seeded initial network for `inputs` features.
MlpModel init_mlp(const MlpConfig& config, Eigen::Index inputs);

/// Mini-batch training of mean BCE; returns the parameters of the epoch with
/// the lowest validation loss. An empty validation set selects on train loss.
TrainResult train(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train, const Eigen::MatrixXd& x_val,
                  const Eigen::VectorXd& y_val, const MlpConfig& config);
TrainResult train(const EncodedMatrix& x_train, const Eigen::VectorXd& y_train, const EncodedMatrix& x_val,
                  const Eigen::VectorXd& y_val, const MlpConfig& config);

/// Probabilities strictly inside (0, 1).
Eigen::VectorXd predict_proba(const MlpModel& model, const Eigen::MatrixXd& x);
Eigen::VectorXd predict_proba(const MlpModel& model, const EncodedMatrix& x);

struct GridResult {
  std::size_t best_index = 0;
  MlpConfig best_config;
  MlpModel best_model;
  std::vector<std::optional<TrainReport>> reports;  // nullopt where training failed
  std::vector<std::string> errors;
};

/// Lowest final validation loss wins; ties go to the earliest config.
GridResult grid_search(const std::vector<MlpConfig>& configs, const EncodedMatrix& x_train,
                       const Eigen::VectorXd& y_train, const EncodedMatrix& x_val, const Eigen::VectorXd& y_val,
                       int workers = 1);

/// Max relative error between the analytic BCE gradient of the seeded initial
/// network and central finite differences.
double gradient_check(const MlpConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double eps = 1e-5);
double gradient_check(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double eps = 1e-5);

std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);
std::string train_curve_csv(const TrainReport& report);

}  // namespace credtext

#include "credtext/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "credtext/error.hpp"
#include "credtext/rng.hpp"

namespace credtext {

namespace {

[[noreturn]] void fail(Errc code, const std::string& detail) { throw Error("model", code, detail); }

void check_labels(const Eigen::VectorXd& y, const char* what) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0) fail(Errc::InvalidLabel, std::string(what) + " labels must be 0 or 1");
}

std::vector<Eigen::Index> align_rows(const std::vector<std::string>& reference, const std::vector<std::string>& ids,
                                     const std::string& source) {
  if (reference.size() != ids.size())
    fail(Errc::RowMismatch, source + " has " + std::to_string(ids.size()) + " rows, expected " +
                                std::to_string(reference.size()));
  std::map<std::string, Eigen::Index> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], static_cast<Eigen::Index>(i));
  std::vector<Eigen::Index> order;
  order.reserve(reference.size());
  for (const auto& id : reference) {
    auto it = pos.find(id);
    if (it == pos.end()) fail(Errc::RowMismatch, source + " lacks id " + id);
    order.push_back(it->second);
  }
  return order;
}

}  // namespace

std::string_view variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::Structured: return "structured";
    case Variant::Text: return "text";
    case Variant::Combined: return "combined";
  }
  return "structured";
}

Variant parse_variant(std::string_view name) {
  if (name == "structured") return Variant::Structured;
  if (name == "text") return Variant::Text;
  if (name == "combined") return Variant::Combined;
  fail(Errc::InvalidConfig, "unknown variant '" + std::string(name) + "'");
}

EncodedMatrix assemble(Variant variant, const EncodedMatrix* structured, std::span<const FeatureBlock> texts) {
  const bool use_structured = variant != Variant::Text;
  const bool use_text = variant != Variant::Structured;
  if (use_structured && structured == nullptr) fail(Errc::EmptySource, "structured block required");
  if (use_text && texts.empty()) fail(Errc::EmptySource, "at least one text block required");

  const std::vector<std::string>& reference = use_structured ? structured->ids : texts.front().ids;
  EncodedMatrix out;
  out.ids = reference;
  Eigen::Index cols = 0;
  if (use_structured) cols += structured->cols();
  if (use_text)
    for (const auto& b : texts) cols += b.dim();
  out.values.resize(static_cast<Eigen::Index>(reference.size()), cols);

  Eigen::Index at = 0;
  if (use_structured) {
    const auto order = align_rows(reference, structured->ids, "structured");
    for (std::size_t r = 0; r < order.size(); ++r)
      out.values.row(static_cast<Eigen::Index>(r)).segment(at, structured->cols()) = structured->values.row(order[r]);
    for (const auto& c : structured->columns) out.columns.push_back("structured:" + c);
    at += structured->cols();
  }
  if (use_text) {
    std::map<std::string, int> seen;
    for (const auto& b : texts) {
      const int occurrence = ++seen[b.source];
      const std::string prefix = occurrence == 1 ? b.source : b.source + "#" + std::to_string(occurrence);
      const auto order = align_rows(reference, b.ids, prefix);
      for (std::size_t r = 0; r < order.size(); ++r)
        out.values.row(static_cast<Eigen::Index>(r)).segment(at, b.dim()) = b.values.row(order[r]);
      for (Eigen::Index k = 0; k < b.dim(); ++k) out.columns.push_back(prefix + "[" + std::to_string(k) + "]");
      at += b.dim();
    }
  }
  return out;
}

void MlpConfig::validate() const {
  for (int h : hidden)
    if (h < 1) fail(Errc::InvalidConfig, "hidden layer sizes must be >= 1");
  if (!(learning_rate > 0.0)) fail(Errc::InvalidConfig, "learning_rate must be > 0");
  if (batch_size < 1) fail(Errc::InvalidConfig, "batch_size must be >= 1");
  if (max_epochs < 1) fail(Errc::InvalidConfig, "max_epochs must be >= 1");
  if (patience < 1) fail(Errc::InvalidConfig, "patience must be >= 1");
}

double bce_loss(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& p) {
  constexpr double kClamp = 1e-12;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double q = std::clamp(p(i), kClamp, 1.0 - kClamp);
    if (p(i) == y(i)) continue;  // exact hit contributes zero
    total -= y(i) * std::log(q) + (1.0 - y(i)) * std::log(1.0 - q);
  }
  return total / static_cast<double>(y.size());
}

MlpModel init_mlp(const MlpConfig& config, Eigen::Index inputs) {
  config.validate();
  Rng rng(derive_seed(config.seed, {0x1417}));
  MlpModel model;
  Eigen::Index fan_in = inputs;
  std::vector<Eigen::Index> widths(config.hidden.begin(), config.hidden.end());
  widths.push_back(1);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const Eigen::Index fan_out = widths[l];
    const bool output = l + 1 == widths.size();
    // He-uniform for rectifier layers, Glorot-uniform for the logistic output
    const double limit = output ? std::sqrt(6.0 / static_cast<double>(fan_in + fan_out))
                                : std::sqrt(6.0 / static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    DenseLayer<double> layer;
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index j = 0; j < fan_in; ++j)
      for (Eigen::Index i = 0; i < fan_out; ++i) layer.weights(i, j) = rng.uniform(-limit, limit);
    // a small positive rectifier bias keeps a unit fed by an all-dead layer off the kink at 0
    layer.bias = Eigen::VectorXd::Constant(fan_out, output ? 0.0 : 0.01);
    model.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return model;
}

TrainResult train(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train, const Eigen::MatrixXd& x_val,
                  const Eigen::VectorXd& y_val, const MlpConfig& config) {
  config.validate();
  if (x_train.rows() != y_train.size()) fail(Errc::RowMismatch, "x_train rows differ from y_train size");
  if (x_val.rows() != y_val.size()) fail(Errc::RowMismatch, "x_val rows differ from y_val size");
  if (x_val.rows() > 0 && x_val.cols() != x_train.cols()) fail(Errc::ColumnMismatch, "x_val columns differ from x_train");
  check_labels(y_train, "train");
  check_labels(y_val, "validation");
  const double positives = y_train.sum();
  if (positives == 0.0 || positives == static_cast<double>(y_train.size()))
    fail(Errc::SingleClassTrain, "training labels hold a single class");

  MlpModel model = init_mlp(config, x_train.cols());
  Rng shuffle_rng(derive_seed(config.seed, {0x5eed}));
  const Eigen::Index n = x_train.rows();
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);
  const bool has_val = x_val.rows() > 0;

  // Adam state
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(model.parameter_count());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(model.parameter_count());
  std::int64_t step = 0;

  TrainResult result;
  result.report.final_val_loss = std::numeric_limits<double>::infinity();
  MlpModel best = model;
  int since_best = 0;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::vector<DenseLayer<double>> grad;
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (batch < n) shuffle_rng.shuffle(std::span<Eigen::Index>(perm));
    int batch_no = 0;
    for (Eigen::Index start = 0; start < n; start += batch, ++batch_no) {
      const Eigen::Index len = std::min(batch, n - start);
      xb.resize(len, x_train.cols());
      yb.resize(len);
      for (Eigen::Index r = 0; r < len; ++r) {
        xb.row(r) = x_train.row(perm[static_cast<std::size_t>(start + r)]);
        yb(r) = y_train(perm[static_cast<std::size_t>(start + r)]);
      }
      const double loss = model.loss_and_gradient(xb, yb, grad);
      if (!std::isfinite(loss))
        fail(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
      const Eigen::VectorXd g = flatten(grad);
      Eigen::VectorXd theta = model.flat_parameters();
      if (config.optimizer == Optimizer::Adam) {
        ++step;
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        theta.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
      } else {
        theta -= config.learning_rate * g;
      }
      model.set_flat_parameters(theta);
    }
    const double train_loss = model.loss(x_train, y_train);
    const double val_loss = has_val ? model.loss(x_val, y_val) : train_loss;
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      fail(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", end of epoch");
    result.report.train_loss.push_back(train_loss);
    result.report.val_loss.push_back(val_loss);
    if (val_loss < result.report.final_val_loss) {
      result.report.final_val_loss = val_loss;
      result.report.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.model = std::move(best);
  return result;
}

TrainResult train(const EncodedMatrix& x_train, const Eigen::VectorXd& y_train, const EncodedMatrix& x_val,
                  const Eigen::VectorXd& y_val, const MlpConfig& config) {
  if (x_val.rows() > 0 && x_val.columns != x_train.columns)
    fail(Errc::ColumnMismatch, "validation columns differ from training columns");
  TrainResult r = train(x_train.values, y_train, x_val.values, y_val, config);
  r.model.input_columns = x_train.columns;
  return r;
}

Eigen::VectorXd predict_proba(const MlpModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.inputs())
    fail(Errc::ColumnMismatch, "model expects " + std::to_string(model.inputs()) + " columns, got " +
                                   std::to_string(x.cols()));
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return model.predict(x).unaryExpr([&](double p) { return std::clamp(p, lo, hi); });
}

Eigen::VectorXd predict_proba(const MlpModel& model, const EncodedMatrix& x) {
  if (!model.input_columns.empty() && x.columns != model.input_columns)
    fail(Errc::ColumnMismatch, "input columns differ from the model's");
  return predict_proba(model, x.values);
}

GridResult grid_search(const std::vector<MlpConfig>& configs, const EncodedMatrix& x_train,
                       const Eigen::VectorXd& y_train, const EncodedMatrix& x_val, const Eigen::VectorXd& y_val,
                       int workers) {
  if (configs.empty()) fail(Errc::InvalidConfig, "grid_search needs at least one config");
  std::vector<std::optional<TrainResult>> results(configs.size());
  std::vector<std::string> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = train(x_train, y_train, x_val, y_val, configs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::clamp(workers, 1, static_cast<int>(configs.size()));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }

  GridResult out;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (results[i]) {
      out.reports.emplace_back(results[i]->report);
      if (!best || results[i]->report.final_val_loss < results[*best]->report.final_val_loss) best = i;
    } else {
      out.reports.emplace_back(std::nullopt);
    }
  }
  out.errors = errors;
  if (!best) {
    // every config failed; surface the first error verbatim
    throw Error("model", Errc::InvalidConfig, "all grid configs failed; first: " + errors.front());
  }
  out.best_index = *best;
  out.best_config = configs[*best];
  out.best_model = std::move(results[*best]->model);
  return out;
}

double gradient_check(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double eps) {
  std::vector<DenseLayer<double>> grad;
  model.loss_and_gradient(x, y, grad);
  const Eigen::VectorXd analytic = flatten(grad);
  MlpModel probe = model;
  Eigen::VectorXd theta = model.flat_parameters();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double saved = theta(i);
    theta(i) = saved + eps;
    probe.set_flat_parameters(theta);
    const double up = probe.loss(x, y);
    theta(i) = saved - eps;
    probe.set_flat_parameters(theta);
    const double down = probe.loss(x, y);
    theta(i) = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
  }
  return worst;
}

double gradient_check(const MlpConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double eps) {
  return gradient_check(init_mlp(config, x.cols()), x, y, eps);
}

std::string model_to_json(const MlpModel& model) {
  nlohmann::ordered_json doc;
  doc["format"] = "credtext-mlp";
  doc["version"] = 1;
  doc["input_columns"] = model.input_columns;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& l : model.layers) {
    nlohmann::ordered_json j;
    j["rows"] = l.weights.rows();
    j["cols"] = l.weights.cols();
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    j["weights"] = w;
    j["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back(std::move(j));
  }
  doc["layers"] = std::move(layers);
  return doc.dump();
}

MlpModel model_from_json(const std::string& text) {
  MlpModel model;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("format") != "credtext-mlp" || doc.at("version") != 1)
      fail(Errc::MalformedLine, "unsupported model format");
    model.input_columns = doc.at("input_columns").get<std::vector<std::string>>();
    for (const auto& j : doc.at("layers")) {
      DenseLayer<double> l;
      const auto rows = j.at("rows").get<Eigen::Index>();
      const auto cols = j.at("cols").get<Eigen::Index>();
      const auto w = j.at("weights").get<std::vector<double>>();
      const auto b = j.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
        fail(Errc::DimMismatch, "layer shape does not match its data");
      l.weights.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
      if (!model.layers.empty() && model.layers.back().outputs() != cols)
        fail(Errc::DimMismatch, "layer shapes do not chain");
      model.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::MalformedLine, e.what());
  }
  return model;
}

std::string train_curve_csv(const TrainReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < report.train_loss.size(); ++e)
    out << e << ',' << report.train_loss[e] << ',' << report.val_loss[e] << '\n';
  return out.str();
}

}  // namespace credtext

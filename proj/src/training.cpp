#include "mlctr/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "mlctr/errors.hpp"
#include "mlctr/rng.hpp"

namespace mlctr {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (max_epochs <= 0) throw ConfigError("max epochs must be positive");
  if (patience <= 0) throw ConfigError("patience must be positive");
  if (!(min_improvement >= 0.0))
    throw ConfigError("minimum improvement must be non-negative");
}

namespace {

template <class Model>
double rmse_impl(const Model& m, std::span<const Sample> samples) {
  if (samples.empty()) throw UsageError("rmse over an empty sample set");
  double sq = 0.0;
  for (const Sample& s : samples) {
    const double e = predict(m, s.tag, s.i, s.j, s.k) - s.value;
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(samples.size()));
}

template <class Model>
TrainResult<Model> train_impl(const Model& model, std::vector<Sample> stream,
                              const std::vector<Sample>& val_samples,
                              const TrainConfig& cfg,
                              const BatchObserver& observer) {
  cfg.validate();
  if (stream.empty()) throw UsageError("no training samples");
  if (val_samples.empty()) throw UsageError("no validation samples");

  Model cur = model;
  TrainResult<Model> result;
  result.best = model;
  result.best_val_rmse = std::numeric_limits<double>::infinity();

  const std::size_t n = stream.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    // Fresh permutation per epoch, pinned by seed + epoch index.
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(epoch));
    shuffle(stream, rng);

    double loss_sum = 0.0;
    for (std::size_t at = 0; at < n; at += bs) {
      const std::span<const Sample> batch(stream.data() + at,
                                          std::min(bs, n - at));
      if (observer) observer(epoch, batch);
      loss_sum += grad_step(cur, batch, cfg.lr);
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(n);
    st.val_rmse = rmse_impl(cur, std::span<const Sample>(val_samples));
    if (!std::isfinite(st.val_rmse))
      throw DivergenceError("non-finite validation RMSE at epoch " +
                            std::to_string(epoch));
    st.seconds =
        cfg.deterministic
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count();
    result.history.push_back(st);

    if (result.best_val_rmse - st.val_rmse >= cfg.min_improvement) {
      result.best_val_rmse = st.val_rmse;
      result.best_epoch = epoch;
      result.best = cur;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

template <class Model>
MetricsReport evaluate_impl(const Model& m, TensorTag tag,
                            std::span<const Sample> samples,
                            const Standardizer& st, double mape_cutoff) {
  if (samples.empty()) throw UsageError("evaluate over an empty sample set");
  std::vector<double> pred(samples.size()), actual(samples.size());
  for (std::size_t q = 0; q < samples.size(); ++q) {
    const Sample& s = samples[q];
    pred[q] = st.inverse(predict(m, tag, s.i, s.j, s.k));
    actual[q] = st.inverse(s.value);
  }
  return metrics_from_pairs(pred, actual, mape_cutoff);
}

template <class Model>
std::vector<double> impute_impl(const Model& m, TensorTag tag,
                                std::span<const Triple> cells,
                                const Standardizer& st) {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const Triple& c : cells)
    out.push_back(st.inverse(predict(m, tag, c.i, c.j, c.k)));
  return out;
}

}  // namespace

TrainResult<SingleModel> train(const SingleModel& model,
                               std::vector<Sample> train_samples,
                               const std::vector<Sample>& val_samples,
                               const TrainConfig& cfg,
                               const BatchObserver& observer) {
  return train_impl(model, std::move(train_samples), val_samples, cfg, observer);
}

TrainResult<CoupledModel> train(const CoupledModel& model,
                                std::vector<Sample> train_samples,
                                const std::vector<Sample>& val_samples,
                                const TrainConfig& cfg,
                                const BatchObserver& observer) {
  return train_impl(model, std::move(train_samples), val_samples, cfg, observer);
}

double rmse_on(const SingleModel& m, std::span<const Sample> samples) {
  return rmse_impl(m, samples);
}

double rmse_on(const CoupledModel& m, std::span<const Sample> samples) {
  return rmse_impl(m, samples);
}

MetricsReport metrics_from_pairs(std::span<const double> predicted,
                                 std::span<const double> actual,
                                 double mape_cutoff) {
  if (predicted.size() != actual.size())
    throw UsageError("prediction/actual size mismatch");
  if (predicted.empty()) throw UsageError("metrics over an empty set");

  MetricsReport r;
  r.n_total = static_cast<std::int64_t>(predicted.size());
  double sq = 0.0, abs_sum = 0.0, pct_sum = 0.0;
  for (std::size_t q = 0; q < predicted.size(); ++q) {
    const double e = predicted[q] - actual[q];
    sq += e * e;
    abs_sum += std::abs(e);
    if (std::abs(actual[q]) >= mape_cutoff) {
      pct_sum += std::abs(e) / std::abs(actual[q]);
      ++r.n_mape;
    }
  }
  const double n = static_cast<double>(r.n_total);
  r.rmse = std::sqrt(sq / n);
  r.mae = abs_sum / n;
  r.mape = r.n_mape > 0 ? 100.0 * pct_sum / static_cast<double>(r.n_mape)
                        : std::numeric_limits<double>::quiet_NaN();
  return r;
}

MetricsReport evaluate(const SingleModel& m, TensorTag tag,
                       std::span<const Sample> samples, const Standardizer& st,
                       double mape_cutoff) {
  return evaluate_impl(m, tag, samples, st, mape_cutoff);
}

MetricsReport evaluate(const CoupledModel& m, TensorTag tag,
                       std::span<const Sample> samples, const Standardizer& st,
                       double mape_cutoff) {
  return evaluate_impl(m, tag, samples, st, mape_cutoff);
}

std::vector<double> impute(const SingleModel& m, TensorTag tag,
                           std::span<const Triple> cells, const Standardizer& st) {
  return impute_impl(m, tag, cells, st);
}

std::vector<double> impute(const CoupledModel& m, TensorTag tag,
                           std::span<const Triple> cells, const Standardizer& st) {
  return impute_impl(m, tag, cells, st);
}

std::vector<Sample> to_samples(const SparseTensor3& t, TensorTag tag) {
  std::vector<Sample> out;
  out.reserve(t.entries.size());
  for (const auto& e : t.entries) out.push_back({tag, e.i, e.j, e.k, e.value});
  return out;
}

}  // namespace mlctr

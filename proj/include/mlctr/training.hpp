#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mlctr/model.hpp"
#include "mlctr/tensor.hpp"

namespace mlctr {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 256;
  int max_epochs = 100;
  int patience = 10;             // epochs without validation improvement before stopping
  double min_improvement = 1e-7; // validation RMSE must drop by at least this much
  std::uint64_t seed = 0;        // drives the per-epoch shuffles
  bool deterministic = false;    // zero out wall-clock fields in the history

  void validate() const;
};

struct EpochStats {
  int epoch = 0;          // 1-based
  double train_loss = 0;  // mean per-sample objective over the epoch
  double val_rmse = 0;    // on standardized values
  double seconds = 0;     // wall clock for the epoch; 0 under deterministic mode
};

template <class Model>
struct TrainResult {
  Model best;                       // snapshot from the best validation epoch
  std::vector<EpochStats> history;  // one row per completed epoch
  int best_epoch = 0;
  double best_val_rmse = 0;
};

// Callback invoked before every mini-batch update; used by tests to inspect
// the sample stream.
using BatchObserver =
    std::function<void(int epoch, std::span<const Sample> batch)>;

// Mini-batch SGD over the training samples with early stopping on
// validation RMSE.  The sample order is reshuffled every epoch from
// seed + epoch; the final partial batch is processed, not dropped.  Coupled
// models take a mixed X/Y stream and each sample updates only the networks
// it reads (see grad_step).  Returns the model snapshot from the epoch with
// the lowest validation RMSE.
TrainResult<SingleModel> train(const SingleModel& model,
                               std::vector<Sample> train_samples,
                               const std::vector<Sample>& val_samples,
                               const TrainConfig& cfg,
                               const BatchObserver& observer = {});
TrainResult<CoupledModel> train(const CoupledModel& model,
                                std::vector<Sample> train_samples,
                                const std::vector<Sample>& val_samples,
                                const TrainConfig& cfg,
                                const BatchObserver& observer = {});

// Root-mean-square prediction error on a sample set, in the units the
// samples carry (the trainer uses standardized values).
double rmse_on(const SingleModel& m, std::span<const Sample> samples);
double rmse_on(const CoupledModel& m, std::span<const Sample> samples);

struct MetricsReport {
  double rmse = 0;
  double mae = 0;
  double mape = 0;  // percent; NaN when no sample passes the cutoff
  std::int64_t n_total = 0;
  std::int64_t n_mape = 0;  // samples with |actual| >= cutoff that enter MAPE
};

// Error metrics in original units: both predictions and targets are mapped
// back through the standardizer before the residuals are taken.  MAPE
// excludes targets with |actual| < cutoff.
MetricsReport evaluate(const SingleModel& m, TensorTag tag,
                       std::span<const Sample> samples, const Standardizer& st,
                       double mape_cutoff = 1e-6);
MetricsReport evaluate(const CoupledModel& m, TensorTag tag,
                       std::span<const Sample> samples, const Standardizer& st,
                       double mape_cutoff = 1e-6);

// Metrics from raw residual pairs (prediction, actual), already in final
// units.  The evaluate overloads reduce to this.
MetricsReport metrics_from_pairs(std::span<const double> predicted,
                                 std::span<const double> actual,
                                 double mape_cutoff = 1e-6);

struct Triple {
  std::int32_t i = 0;
  std::int32_t j = 0;
  std::int32_t k = 0;
};

// Predictions for unobserved cells, mapped back to original units.
std::vector<double> impute(const SingleModel& m, TensorTag tag,
                           std::span<const Triple> cells, const Standardizer& st);
std::vector<double> impute(const CoupledModel& m, TensorTag tag,
                           std::span<const Triple> cells, const Standardizer& st);

// Flattens a tensor's entries into tagged samples.
std::vector<Sample> to_samples(const SparseTensor3& t, TensorTag tag);

}  // namespace mlctr

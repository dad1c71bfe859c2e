#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlctr/embedding_net.hpp"

namespace mlctr {

// Which tensor an observation belongs to.  Single-tensor models only accept
// X; coupled models route Y through the shared mode-1/mode-2 networks and a
// private mode-4 network.
enum class TensorTag { X, Y };

enum class ReadoutKind { dot, mlp };

// One observed cell, tagged with its source tensor.
struct Sample {
  TensorTag tag = TensorTag::X;
  std::int32_t i = 0;
  std::int32_t j = 0;
  std::int32_t k = 0;  // mode-3 index for X samples, mode-4 index for Y samples
  double value = 0.0;
};

struct ModelSpec {
  int rank = 8;
  int layers = 0;
  int hidden = 8;
  Activation activation;  // elu by default
  ReadoutKind readout = ReadoutKind::dot;
  int mlp_hidden = 0;     // 0 picks 2 * rank
  double lambda = 1.0;    // weight of Y-sample losses in the coupled objective
  std::uint64_t seed = 0;
  bool freeze_base = false;  // zero the base tables and never update them

  int mlp_width() const { return mlp_hidden > 0 ? mlp_hidden : 2 * rank; }
  void validate() const;
};

// Readout head for ReadoutKind::mlp: a one-hidden-layer regressor applied to
// the element-wise product z = u .* v .* t of the three output embeddings.
class MlpHead {
 public:
  struct Tape {
    Eigen::RowVectorXd pre;  // z * w1 + b1
    Eigen::RowVectorXd hid;  // act(pre)
  };

  struct Grads {
    Eigen::MatrixXd w1;
    Eigen::RowVectorXd b1;
    Eigen::VectorXd w2;
    double b2 = 0.0;
  };

  static MlpHead init(int rank, int width, Activation act, std::uint64_t seed);

  double forward(const Eigen::RowVectorXd& z, Tape& tape) const;

  // Adds this sample's parameter gradients into `grads` and writes
  // d loss / d z into grad_z, given upstream = d loss / d prediction.
  void accumulate(const Tape& tape, const Eigen::RowVectorXd& z, double upstream,
                  Grads& grads, Eigen::RowVectorXd& grad_z) const;

  Eigen::MatrixXd w1;      // rank x width
  Eigen::RowVectorXd b1;   // width
  Eigen::VectorXd w2;      // width
  double b2 = 0.0;
  Activation activation;
};

// Three embedding networks, one per mode, combined by the readout.
struct SingleModel {
  ModelSpec spec;
  std::array<std::int64_t, 3> dims{0, 0, 0};
  EmbeddingNetwork u, v, t;
  std::optional<MlpHead> head;
};

// Adds a second tensor Y sharing modes 1 and 2: X(i,j,k) is read out from
// (u_i, v_j, t_k), Y(i,j,m) from (u_i, v_j, w_m).  X samples never touch w,
// Y samples never touch t.
struct CoupledModel {
  ModelSpec spec;
  std::array<std::int64_t, 4> dims{0, 0, 0, 0};  // d1 d2 d3 d4
  EmbeddingNetwork u, v, t, w;
  std::optional<MlpHead> head_x, head_y;
};

SingleModel make_single_model(const std::array<std::int64_t, 3>& dims,
                              const ModelSpec& spec);
CoupledModel make_coupled_model(const std::array<std::int64_t, 4>& dims,
                                const ModelSpec& spec);

// Plain CP-style factorization: zero layers, dot readout.
SingleModel make_cp_baseline(const std::array<std::int64_t, 3>& dims, int rank,
                             std::uint64_t seed);

double predict(const SingleModel& m, TensorTag tag, int i, int j, int k);
double predict(const CoupledModel& m, TensorTag tag, int i, int j, int k);

// Sum of squared errors over the batch; Y samples are weighted by lambda.
double loss_batch(const SingleModel& m, std::span<const Sample> batch);
double loss_batch(const CoupledModel& m, std::span<const Sample> batch);

// One mini-batch SGD step.  Each sample contributes e * (partner products)
// to the rows it touches (lambda * e for Y samples); gradients are summed
// over the batch and applied once.  Returns the batch loss before the
// update.  Throws DivergenceError when a prediction turns non-finite.
double grad_step(SingleModel& m, std::span<const Sample> batch, double lr);
double grad_step(CoupledModel& m, std::span<const Sample> batch, double lr);

// Flat parameter vector interface in a fixed canonical order (networks
// u, v, t[, w], each as base then P_1, Q_1, ..., all row-major, followed by
// any heads as w1, b1, w2, b2).  Used by checkpointing and the
// finite-difference oracle.
std::size_t param_count(const SingleModel& m);
std::size_t param_count(const CoupledModel& m);
Eigen::VectorXd get_params(const SingleModel& m);
Eigen::VectorXd get_params(const CoupledModel& m);
void set_params(SingleModel& m, const Eigen::VectorXd& params);
void set_params(CoupledModel& m, const Eigen::VectorXd& params);

// Analytic gradient of loss_batch with respect to the flat parameter
// vector, aligned with get_params.  (grad_step applies the conventional
// half-gradient e instead of 2e; this is the exact derivative.)
Eigen::VectorXd loss_gradients(const SingleModel& m, std::span<const Sample> batch);
Eigen::VectorXd loss_gradients(const CoupledModel& m, std::span<const Sample> batch);

}  // namespace mlctr

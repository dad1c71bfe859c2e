#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mlctr/activation.hpp"

namespace mlctr {

struct NetSpec {
  int entities = 0;  // number of rows (entities along one tensor mode)
  int rank = 0;      // embedding width r
  int layers = 0;    // residual layers on top of the base table; 0 = plain table
  int hidden = 0;    // inner width h of each layer
  Activation activation;
  bool zero_base = false;  // start the base table at zero (kept frozen by callers)

  void validate() const;
};

// Per-row activations recorded by forward_row, consumed by backward_row.
// `version` ties the tape to the parameter state it was produced under.
struct RowTape {
  int row = -1;
  std::uint64_t version = 0;
  std::vector<Eigen::RowVectorXd> z;  // layer inputs through the weights: P_l[row] * Q_l
  std::vector<Eigen::RowVectorXd> s;  // by-pass sums: u_{l-1} + act(z_l)
  Eigen::RowVectorXd out;             // u_L = act(s_L), or the base row when layers == 0
};

// Per-row parameter gradients produced by backward_row.
struct RowGrads {
  Eigen::RowVectorXd base;            // d loss / d base[row]
  std::vector<Eigen::RowVectorXd> p;  // d loss / d P_l[row]
  std::vector<Eigen::MatrixXd> q;     // d loss / d Q_l (dense: the whole Q_l is touched)
};

// Residual stack of rank-h factorizations on top of a base embedding table:
//
//   u_0 = base[row]
//   u_l = act(u_{l-1} + act(P_l[row] * Q_l)),   l = 1..layers
//
// Each row is independent of all others, so forward/backward work row-wise
// and a mini-batch update touches only the rows it visits.
class EmbeddingNetwork {
 public:
  // Gaussian init: base ~ N(0, 1/sqrt(rank)), P/Q ~ N(0, 1/sqrt(hidden)),
  // filled in row-major order from a dedicated engine so a seed pins every
  // coefficient.
  static EmbeddingNetwork init(const NetSpec& spec, std::uint64_t seed);

  int entities() const { return static_cast<int>(base.rows()); }
  int rank() const { return static_cast<int>(base.cols()); }
  int depth() const { return static_cast<int>(p.size()); }

  // Computes the output embedding of one row, recording activations.
  void forward_row(int row, RowTape& tape) const;

  // Convenience wrapper when no tape is needed afterwards.
  Eigen::RowVectorXd embed_row(int row) const;

  // Accumulates nothing: writes the gradients for this row into `grads`
  // given d loss / d out.  Throws TapeError if the parameters changed
  // after the tape was recorded.
  void backward_row(const RowTape& tape, const Eigen::RowVectorXd& grad_out,
                    RowGrads& grads) const;

  // Output embeddings for every row, one row per entity.
  Eigen::MatrixXd forward_all() const;

  // Callers must bump the version after every parameter update so stale
  // tapes are rejected.
  void mark_updated() { ++version_; }
  std::uint64_t version() const { return version_; }

  Activation activation;
  Eigen::MatrixXd base;              // entities x rank
  std::vector<Eigen::MatrixXd> p;    // entities x hidden, one per layer
  std::vector<Eigen::MatrixXd> q;    // hidden x rank, one per layer

 private:
  std::uint64_t version_ = 0;
};

}  // namespace mlctr

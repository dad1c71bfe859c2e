#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mlctr/model.hpp"
#include "mlctr/tensor.hpp"

namespace mlctr {

enum class SynthNonlinearity { none, tanh_warp };

struct SynthSpec {
  std::array<std::int64_t, 4> dims{0, 0, 0, 0};  // d4 only read when coupled
  int true_rank = 2;
  double noise_std = 0.0;
  SynthNonlinearity nonlinearity = SynthNonlinearity::none;
  bool coupled = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Ground-truth factors plus the fully observed tensors built from them.
struct SynthData {
  SparseTensor3 x;  // every cell present
  SparseTensor3 y;  // empty unless spec.coupled
  Eigen::MatrixXd u, v, t, w;  // w empty unless spec.coupled
  SynthSpec spec;
};

// Draws N(0,1) factor matrices and expands the rank-true_rank product into
// dense COO tensors, optionally warped cell-wise by tanh and perturbed by
// Gaussian noise.  A coupled pair shares u and v.
SynthData generate(const SynthSpec& spec);

// Keeps a seeded random subset of entries so the result has the requested
// sparsity (fraction of *all cells* unobserved).  The retained set is a
// prefix of one fixed permutation, so masks of the same tensor at
// increasing sparsity under the same seed are nested.  Throws MaskError
// when nothing would remain.
SparseTensor3 mask(const SparseTensor3& t, double target_sparsity,
                   std::uint64_t seed);

// Central-difference gradient of `f` at `params`.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& params, double step);

// Every cell of the model's X tensor (or Y for coupled models), in
// lexicographic (i, j, k) order.
std::vector<double> dense_reconstruct(const SingleModel& m);
std::vector<double> dense_reconstruct(const CoupledModel& m, TensorTag tag);

// FNV-1a hash of a matrix's coefficients in row-major order, as a hex
// string; used to fingerprint ground-truth factors in sidecar files.
std::string matrix_checksum(const Eigen::MatrixXd& m);

}  // namespace mlctr

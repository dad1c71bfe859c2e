#include "mlctr/embedding_net.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mlctr/errors.hpp"
#include "mlctr/rng.hpp"

namespace mlctr {

void NetSpec::validate() const {
  if (entities <= 0) throw ConfigError("network needs a positive entity count");
  if (rank <= 0) throw ConfigError("network rank must be positive");
  if (layers < 0) throw ConfigError("layer count must be non-negative");
  if (layers > 0 && hidden <= 0)
    throw ConfigError("layered network needs a positive hidden width");
}

namespace {

void fill_gaussian(Eigen::MatrixXd& m, double std, std::mt19937_64& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std * gaussian(rng);
}

}  // namespace

EmbeddingNetwork EmbeddingNetwork::init(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);

  EmbeddingNetwork net;
  net.activation = spec.activation;
  net.base.setZero(spec.entities, spec.rank);
  if (!spec.zero_base) fill_gaussian(net.base, 1.0 / std::sqrt(spec.rank), rng);

  net.p.resize(spec.layers);
  net.q.resize(spec.layers);
  const double w_std = spec.layers > 0 ? 1.0 / std::sqrt(spec.hidden) : 0.0;
  for (int l = 0; l < spec.layers; ++l) {
    net.p[l].resize(spec.entities, spec.hidden);
    net.q[l].resize(spec.hidden, spec.rank);
    fill_gaussian(net.p[l], w_std, rng);
    fill_gaussian(net.q[l], w_std, rng);
  }
  return net;
}

void EmbeddingNetwork::forward_row(int row, RowTape& tape) const {
  if (row < 0 || row >= entities())
    throw BoundsError("row " + std::to_string(row) + " outside network with " +
                      std::to_string(entities()) + " entities");
  const int L = depth();
  const int r = rank();
  tape.row = row;
  tape.version = version_;
  tape.z.resize(L);
  tape.s.resize(L);
  tape.out = base.row(row);
  for (int l = 0; l < L; ++l) {
    tape.z[l].noalias() = p[l].row(row) * q[l];
    tape.s[l].resize(r);
    for (int c = 0; c < r; ++c)
      tape.s[l](c) = tape.out(c) + activation.value(tape.z[l](c));
    for (int c = 0; c < r; ++c) tape.out(c) = activation.value(tape.s[l](c));
  }
}

Eigen::RowVectorXd EmbeddingNetwork::embed_row(int row) const {
  RowTape tape;
  forward_row(row, tape);
  return tape.out;
}

void EmbeddingNetwork::backward_row(const RowTape& tape,
                                    const Eigen::RowVectorXd& grad_out,
                                    RowGrads& grads) const {
  if (tape.version != version_)
    throw TapeError("tape recorded under parameter version " +
                    std::to_string(tape.version) + ", network is at " +
                    std::to_string(version_));
  if (tape.row < 0 || tape.row >= entities())
    throw TapeError("tape does not hold a valid row");
  const int L = depth();
  const int r = rank();
  if (static_cast<int>(tape.z.size()) != L || grad_out.size() != r)
    throw TapeError("tape does not match network shape");

  grads.p.resize(L);
  grads.q.resize(L);

  // Walk the layers backwards.  With s_l = u_{l-1} + act(z_l) the gradient
  // w.r.t. u_{l-1} equals the gradient w.r.t. s_l, which also drives the
  // weight gradients of layer l through act'(z_l).
  Eigen::RowVectorXd g = grad_out;  // d loss / d u_l
  Eigen::RowVectorXd gz(r);
  for (int l = L - 1; l >= 0; --l) {
    for (int c = 0; c < r; ++c) g(c) *= activation.deriv(tape.s[l](c));
    for (int c = 0; c < r; ++c) gz(c) = g(c) * activation.deriv(tape.z[l](c));
    grads.p[l].noalias() = gz * q[l].transpose();
    grads.q[l].noalias() = p[l].row(tape.row).transpose() * gz;
  }
  grads.base = g;
}

Eigen::MatrixXd EmbeddingNetwork::forward_all() const {
  Eigen::MatrixXd out(entities(), rank());
  RowTape tape;
  for (int i = 0; i < entities(); ++i) {
    forward_row(i, tape);
    out.row(i) = tape.out;
  }
  return out;
}

}  // namespace mlctr

#include "mlctr/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mlctr/errors.hpp"
#include "mlctr/rng.hpp"

namespace mlctr {

void ModelSpec::validate() const {
  if (rank <= 0) throw ConfigError("rank must be positive");
  if (layers < 0) throw ConfigError("layer count must be non-negative");
  if (layers > 0 && hidden <= 0)
    throw ConfigError("layered model needs a positive hidden width");
  if (mlp_hidden < 0) throw ConfigError("mlp hidden width must be non-negative");
  if (!(lambda > 0.0)) throw ConfigError("coupling weight lambda must be positive");
}

// ---------------------------------------------------------------------------
// MLP readout head

MlpHead MlpHead::init(int rank, int width, Activation act, std::uint64_t seed) {
  if (rank <= 0 || width <= 0) throw ConfigError("mlp head needs positive widths");
  std::mt19937_64 rng(seed);
  MlpHead h;
  h.activation = act;
  h.w1.resize(rank, width);
  for (Eigen::Index r = 0; r < h.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < h.w1.cols(); ++c)
      h.w1(r, c) = gaussian(rng) / std::sqrt(static_cast<double>(rank));
  // small random hidden biases keep relu heads off the kink even when an
  // input embedding comes in fully zeroed
  h.b1.resize(width);
  for (Eigen::Index c = 0; c < width; ++c)
    h.b1(c) = gaussian(rng) / std::sqrt(static_cast<double>(width));
  h.w2.resize(width);
  for (Eigen::Index c = 0; c < width; ++c)
    h.w2(c) = gaussian(rng) / std::sqrt(static_cast<double>(width));
  h.b2 = 0.0;
  return h;
}

double MlpHead::forward(const Eigen::RowVectorXd& z, Tape& tape) const {
  tape.pre.noalias() = z * w1;
  tape.pre += b1;
  tape.hid.resize(tape.pre.size());
  for (Eigen::Index c = 0; c < tape.pre.size(); ++c)
    tape.hid(c) = activation.value(tape.pre(c));
  return (tape.hid * w2).value() + b2;
}

void MlpHead::accumulate(const Tape& tape, const Eigen::RowVectorXd& z,
                         double upstream, Grads& grads,
                         Eigen::RowVectorXd& grad_z) const {
  grads.w2.noalias() += upstream * tape.hid.transpose();
  grads.b2 += upstream;
  Eigen::RowVectorXd gpre = upstream * w2.transpose();
  for (Eigen::Index c = 0; c < gpre.size(); ++c)
    gpre(c) *= activation.deriv(tape.pre(c));
  grads.w1.noalias() += z.transpose() * gpre;
  grads.b1 += gpre;
  grad_z.noalias() = gpre * w1.transpose();
}

// ---------------------------------------------------------------------------
// Construction

namespace {

NetSpec net_spec_for(const ModelSpec& spec, std::int64_t entities) {
  NetSpec n;
  n.entities = static_cast<int>(entities);
  n.rank = spec.rank;
  n.layers = spec.layers;
  n.hidden = spec.hidden;
  n.activation = spec.activation;
  n.zero_base = spec.freeze_base;
  return n;
}

}  // namespace

SingleModel make_single_model(const std::array<std::int64_t, 3>& dims,
                              const ModelSpec& spec) {
  spec.validate();
  for (const auto d : dims)
    if (d <= 0) throw ConfigError("model dimensions must be positive");

  // One seed sequence pins every network and head, in a fixed order.
  std::mt19937_64 seq(spec.seed);
  SingleModel m;
  m.spec = spec;
  m.dims = dims;
  m.u = EmbeddingNetwork::init(net_spec_for(spec, dims[0]), seq());
  m.v = EmbeddingNetwork::init(net_spec_for(spec, dims[1]), seq());
  m.t = EmbeddingNetwork::init(net_spec_for(spec, dims[2]), seq());
  if (spec.readout == ReadoutKind::mlp)
    m.head = MlpHead::init(spec.rank, spec.mlp_width(), spec.activation, seq());
  return m;
}

CoupledModel make_coupled_model(const std::array<std::int64_t, 4>& dims,
                                const ModelSpec& spec) {
  spec.validate();
  for (const auto d : dims)
    if (d <= 0) throw ConfigError("model dimensions must be positive");

  std::mt19937_64 seq(spec.seed);
  CoupledModel m;
  m.spec = spec;
  m.dims = dims;
  m.u = EmbeddingNetwork::init(net_spec_for(spec, dims[0]), seq());
  m.v = EmbeddingNetwork::init(net_spec_for(spec, dims[1]), seq());
  m.t = EmbeddingNetwork::init(net_spec_for(spec, dims[2]), seq());
  m.w = EmbeddingNetwork::init(net_spec_for(spec, dims[3]), seq());
  if (spec.readout == ReadoutKind::mlp) {
    m.head_x = MlpHead::init(spec.rank, spec.mlp_width(), spec.activation, seq());
    m.head_y = MlpHead::init(spec.rank, spec.mlp_width(), spec.activation, seq());
  }
  return m;
}

SingleModel make_cp_baseline(const std::array<std::int64_t, 3>& dims, int rank,
                             std::uint64_t seed) {
  ModelSpec spec;
  spec.rank = rank;
  spec.layers = 0;
  spec.hidden = 0;
  spec.readout = ReadoutKind::dot;
  spec.seed = seed;
  return make_single_model(dims, spec);
}

// ---------------------------------------------------------------------------
// Shared prediction / gradient machinery.  A View flattens both model kinds
// into "three networks per sample": X samples read (u, v, t), Y samples read
// (u, v, w), so one code path serves single and coupled models.

namespace {

struct View {
  const ModelSpec* spec = nullptr;
  std::array<std::int64_t, 4> dims{0, 0, 0, 0};  // d4 == 0 for single models
  EmbeddingNetwork* u = nullptr;
  EmbeddingNetwork* v = nullptr;
  EmbeddingNetwork* t = nullptr;
  EmbeddingNetwork* w = nullptr;
  MlpHead* head_x = nullptr;
  MlpHead* head_y = nullptr;
};

View make_view(SingleModel& m) {
  View vw;
  vw.spec = &m.spec;
  vw.dims = {m.dims[0], m.dims[1], m.dims[2], 0};
  vw.u = &m.u;
  vw.v = &m.v;
  vw.t = &m.t;
  vw.head_x = m.head ? &*m.head : nullptr;
  return vw;
}

View make_view(CoupledModel& m) {
  View vw;
  vw.spec = &m.spec;
  vw.dims = m.dims;
  vw.u = &m.u;
  vw.v = &m.v;
  vw.t = &m.t;
  vw.w = &m.w;
  vw.head_x = m.head_x ? &*m.head_x : nullptr;
  vw.head_y = m.head_y ? &*m.head_y : nullptr;
  return vw;
}

// Const entry points funnel through the same machinery; only grad_step and
// set_params mutate.
View make_view(const SingleModel& m) { return make_view(const_cast<SingleModel&>(m)); }
View make_view(const CoupledModel& m) { return make_view(const_cast<CoupledModel&>(m)); }

void check_sample(const View& vw, TensorTag tag, int i, int j, int k) {
  if (tag == TensorTag::Y && vw.w == nullptr)
    throw UsageError("model has no second tensor, Y sample rejected");
  const std::int64_t d3 = tag == TensorTag::X ? vw.dims[2] : vw.dims[3];
  if (i < 0 || i >= vw.dims[0] || j < 0 || j >= vw.dims[1] || k < 0 || k >= d3)
    throw BoundsError("sample (" + std::to_string(i) + ", " + std::to_string(j) +
                      ", " + std::to_string(k) + ") outside model dimensions");
}

struct SampleTapes {
  RowTape a, b, c;
  MlpHead::Tape head;
  Eigen::RowVectorXd z;
};

double predict_one(const View& vw, TensorTag tag, int i, int j, int k,
                   SampleTapes& tp) {
  check_sample(vw, tag, i, j, k);
  const EmbeddingNetwork& third = tag == TensorTag::X ? *vw.t : *vw.w;
  vw.u->forward_row(i, tp.a);
  vw.v->forward_row(j, tp.b);
  third.forward_row(k, tp.c);
  tp.z = tp.a.out.cwiseProduct(tp.b.out).cwiseProduct(tp.c.out);
  const MlpHead* head = tag == TensorTag::X ? vw.head_x : vw.head_y;
  if (head) return head->forward(tp.z, tp.head);
  return tp.z.sum();
}

double loss_batch_view(const View& vw, std::span<const Sample> batch) {
  if (batch.empty()) throw UsageError("empty batch");
  SampleTapes tp;
  double loss = 0.0;
  for (const Sample& s : batch) {
    const double pred = predict_one(vw, s.tag, s.i, s.j, s.k, tp);
    const double e = pred - s.value;
    const double wgt = s.tag == TensorTag::Y ? vw.spec->lambda : 1.0;
    loss += wgt * e * e;
  }
  return loss;
}

// Dense per-batch gradient accumulators, shaped like the parameters.
struct NetBuf {
  bool touched = false;
  Eigen::MatrixXd base;
  std::vector<Eigen::MatrixXd> p, q;

  void init_like(const EmbeddingNetwork& n) {
    touched = false;
    base.setZero(n.base.rows(), n.base.cols());
    p.resize(n.depth());
    q.resize(n.depth());
    for (int l = 0; l < n.depth(); ++l) {
      p[l].setZero(n.p[l].rows(), n.p[l].cols());
      q[l].setZero(n.q[l].rows(), n.q[l].cols());
    }
  }
};

struct HeadBuf {
  bool touched = false;
  MlpHead::Grads g;

  void init_like(const MlpHead& h) {
    touched = false;
    g.w1.setZero(h.w1.rows(), h.w1.cols());
    g.b1.setZero(h.b1.size());
    g.w2.setZero(h.w2.size());
    g.b2 = 0.0;
  }
};

struct GradBufs {
  NetBuf u, v, t, w;
  HeadBuf head_x, head_y;

  void init_like(const View& vw) {
    u.init_like(*vw.u);
    v.init_like(*vw.v);
    t.init_like(*vw.t);
    if (vw.w) w.init_like(*vw.w);
    if (vw.head_x) head_x.init_like(*vw.head_x);
    if (vw.head_y) head_y.init_like(*vw.head_y);
  }
};

void add_row_grads(NetBuf& buf, int row, const RowGrads& rg) {
  buf.touched = true;
  buf.base.row(row) += rg.base;
  for (std::size_t l = 0; l < rg.p.size(); ++l) {
    buf.p[l].row(row) += rg.p[l];
    buf.q[l] += rg.q[l];
  }
}

// Accumulates upstream_scale * weight * e times the prediction's parameter
// derivatives for every sample.  upstream_scale = 1 reproduces the
// conventional update step; 2 gives the exact gradient of the squared loss.
// Returns the batch loss.
double accumulate_batch(const View& vw, std::span<const Sample> batch,
                        double upstream_scale, GradBufs& bufs) {
  if (batch.empty()) throw UsageError("empty batch");
  bufs.init_like(vw);

  SampleTapes tp;
  RowGrads rg;
  Eigen::RowVectorXd grad_z, gout;
  double loss = 0.0;

  for (const Sample& s : batch) {
    const double pred = predict_one(vw, s.tag, s.i, s.j, s.k, tp);
    if (!std::isfinite(pred))
      throw DivergenceError("non-finite prediction at sample (" +
                            std::to_string(s.i) + ", " + std::to_string(s.j) +
                            ", " + std::to_string(s.k) + ")");
    const double e = pred - s.value;
    const double wgt = s.tag == TensorTag::Y ? vw.spec->lambda : 1.0;
    loss += wgt * e * e;

    const double upstream = upstream_scale * wgt * e;
    const MlpHead* head = s.tag == TensorTag::X ? vw.head_x : vw.head_y;
    HeadBuf& hbuf = s.tag == TensorTag::X ? bufs.head_x : bufs.head_y;
    if (head) {
      head->accumulate(tp.head, tp.z, upstream, hbuf.g, grad_z);
      hbuf.touched = true;
    } else {
      grad_z.setConstant(tp.z.size(), upstream);
    }

    EmbeddingNetwork& third = s.tag == TensorTag::X ? *vw.t : *vw.w;
    NetBuf& third_buf = s.tag == TensorTag::X ? bufs.t : bufs.w;

    // d pred / d u = grad_z .* v .* c, and cyclically for the others.
    gout = grad_z.cwiseProduct(tp.b.out).cwiseProduct(tp.c.out);
    vw.u->backward_row(tp.a, gout, rg);
    add_row_grads(bufs.u, s.i, rg);

    gout = grad_z.cwiseProduct(tp.a.out).cwiseProduct(tp.c.out);
    vw.v->backward_row(tp.b, gout, rg);
    add_row_grads(bufs.v, s.j, rg);

    gout = grad_z.cwiseProduct(tp.a.out).cwiseProduct(tp.b.out);
    third.backward_row(tp.c, gout, rg);
    add_row_grads(third_buf, s.k, rg);
  }
  if (!std::isfinite(loss)) throw DivergenceError("non-finite batch loss");
  return loss;
}

void apply_net(EmbeddingNetwork& net, const NetBuf& buf, double lr,
               bool freeze_base) {
  if (!buf.touched) return;
  if (!freeze_base) net.base -= lr * buf.base;
  for (int l = 0; l < net.depth(); ++l) {
    net.p[l] -= lr * buf.p[l];
    net.q[l] -= lr * buf.q[l];
  }
  net.mark_updated();
}

void apply_head(MlpHead& head, const HeadBuf& buf, double lr) {
  if (!buf.touched) return;
  head.w1 -= lr * buf.g.w1;
  head.b1 -= lr * buf.g.b1;
  head.w2 -= lr * buf.g.w2;
  head.b2 -= lr * buf.g.b2;
}

double grad_step_view(const View& vw, std::span<const Sample> batch, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  GradBufs bufs;
  const double loss = accumulate_batch(vw, batch, 1.0, bufs);
  const bool freeze = vw.spec->freeze_base;
  apply_net(*vw.u, bufs.u, lr, freeze);
  apply_net(*vw.v, bufs.v, lr, freeze);
  apply_net(*vw.t, bufs.t, lr, freeze);
  if (vw.w) apply_net(*vw.w, bufs.w, lr, freeze);
  if (vw.head_x) apply_head(*vw.head_x, bufs.head_x, lr);
  if (vw.head_y) apply_head(*vw.head_y, bufs.head_y, lr);
  return loss;
}

// ---------------------------------------------------------------------------
// Flat parameter vector, canonical order: nets u, v, t[, w] (base, then
// P_l, Q_l per layer, row-major), then heads x[, y] (w1, b1, w2, b2).

template <class Fn>
void visit_matrix(Eigen::MatrixXd& m, Fn&& fn) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) fn(m(r, c));
}

template <class Fn>
void visit_net(EmbeddingNetwork& n, Fn&& fn) {
  visit_matrix(n.base, fn);
  for (int l = 0; l < n.depth(); ++l) {
    visit_matrix(n.p[l], fn);
    visit_matrix(n.q[l], fn);
  }
}

template <class Fn>
void visit_net_buf(NetBuf& b, Fn&& fn) {
  visit_matrix(b.base, fn);
  for (std::size_t l = 0; l < b.p.size(); ++l) {
    visit_matrix(b.p[l], fn);
    visit_matrix(b.q[l], fn);
  }
}

template <class Fn>
void visit_head(MlpHead& h, Fn&& fn) {
  visit_matrix(h.w1, fn);
  for (Eigen::Index c = 0; c < h.b1.size(); ++c) fn(h.b1(c));
  for (Eigen::Index c = 0; c < h.w2.size(); ++c) fn(h.w2(c));
  fn(h.b2);
}

template <class Fn>
void visit_head_grads(MlpHead::Grads& g, Fn&& fn) {
  visit_matrix(g.w1, fn);
  for (Eigen::Index c = 0; c < g.b1.size(); ++c) fn(g.b1(c));
  for (Eigen::Index c = 0; c < g.w2.size(); ++c) fn(g.w2(c));
  fn(g.b2);
}

template <class Fn>
void visit_view(const View& vw, Fn&& fn) {
  visit_net(*vw.u, fn);
  visit_net(*vw.v, fn);
  visit_net(*vw.t, fn);
  if (vw.w) visit_net(*vw.w, fn);
  if (vw.head_x) visit_head(*vw.head_x, fn);
  if (vw.head_y) visit_head(*vw.head_y, fn);
}

std::size_t param_count_view(const View& vw) {
  std::size_t n = 0;
  visit_view(vw, [&](double&) { ++n; });
  return n;
}

Eigen::VectorXd get_params_view(const View& vw) {
  Eigen::VectorXd out(param_count_view(vw));
  Eigen::Index pos = 0;
  visit_view(vw, [&](double& x) { out(pos++) = x; });
  return out;
}

void set_params_view(const View& vw, const Eigen::VectorXd& params) {
  if (static_cast<std::size_t>(params.size()) != param_count_view(vw))
    throw UsageError("parameter vector has the wrong length");
  Eigen::Index pos = 0;
  visit_view(vw, [&](double& x) { x = params(pos++); });
  vw.u->mark_updated();
  vw.v->mark_updated();
  vw.t->mark_updated();
  if (vw.w) vw.w->mark_updated();
}

Eigen::VectorXd loss_gradients_view(const View& vw, std::span<const Sample> batch) {
  GradBufs bufs;
  accumulate_batch(vw, batch, 2.0, bufs);
  Eigen::VectorXd out(param_count_view(vw));
  Eigen::Index pos = 0;
  auto fn = [&](double& x) { out(pos++) = x; };
  visit_net_buf(bufs.u, fn);
  visit_net_buf(bufs.v, fn);
  visit_net_buf(bufs.t, fn);
  if (vw.w) visit_net_buf(bufs.w, fn);
  if (vw.head_x) visit_head_grads(bufs.head_x.g, fn);
  if (vw.head_y) visit_head_grads(bufs.head_y.g, fn);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points

double predict(const SingleModel& m, TensorTag tag, int i, int j, int k) {
  SampleTapes tp;
  return predict_one(make_view(m), tag, i, j, k, tp);
}

double predict(const CoupledModel& m, TensorTag tag, int i, int j, int k) {
  SampleTapes tp;
  return predict_one(make_view(m), tag, i, j, k, tp);
}

double loss_batch(const SingleModel& m, std::span<const Sample> batch) {
  return loss_batch_view(make_view(m), batch);
}

double loss_batch(const CoupledModel& m, std::span<const Sample> batch) {
  return loss_batch_view(make_view(m), batch);
}

double grad_step(SingleModel& m, std::span<const Sample> batch, double lr) {
  return grad_step_view(make_view(m), batch, lr);
}

double grad_step(CoupledModel& m, std::span<const Sample> batch, double lr) {
  return grad_step_view(make_view(m), batch, lr);
}

std::size_t param_count(const SingleModel& m) { return param_count_view(make_view(m)); }
std::size_t param_count(const CoupledModel& m) { return param_count_view(make_view(m)); }

Eigen::VectorXd get_params(const SingleModel& m) { return get_params_view(make_view(m)); }
Eigen::VectorXd get_params(const CoupledModel& m) { return get_params_view(make_view(m)); }

void set_params(SingleModel& m, const Eigen::VectorXd& params) {
  set_params_view(make_view(m), params);
}

void set_params(CoupledModel& m, const Eigen::VectorXd& params) {
  set_params_view(make_view(m), params);
}

Eigen::VectorXd loss_gradients(const SingleModel& m, std::span<const Sample> batch) {
  return loss_gradients_view(make_view(m), batch);
}

Eigen::VectorXd loss_gradients(const CoupledModel& m, std::span<const Sample> batch) {
  return loss_gradients_view(make_view(m), batch);
}

}  // namespace mlctr

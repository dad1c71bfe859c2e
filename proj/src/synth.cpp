#include "mlctr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>

#include "mlctr/errors.hpp"
#include "mlctr/rng.hpp"

namespace mlctr {

void SynthSpec::validate() const {
  const int nmodes = coupled ? 4 : 3;
  for (int d = 0; d < nmodes; ++d)
    if (dims[d] <= 0) throw ConfigError("synthetic dims must be positive");
  if (true_rank <= 0) throw ConfigError("true rank must be positive");
  for (int d = 0; d < nmodes; ++d)
    if (true_rank > dims[d])
      throw ConfigError("true rank exceeds a tensor extent");
  if (noise_std < 0.0) throw ConfigError("noise level must be non-negative");
}

namespace {

Eigen::MatrixXd draw_factor(std::int64_t rows, int rank, std::mt19937_64& rng) {
  Eigen::MatrixXd m(rows, rank);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = gaussian(rng);
  return m;
}

SparseTensor3 expand(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const Eigen::MatrixXd& c, const SynthSpec& spec,
                     std::mt19937_64& noise_rng, const std::string& name) {
  SparseTensor3 t;
  t.dims = {a.rows(), b.rows(), c.rows()};
  t.name = name;
  t.entries.reserve(static_cast<std::size_t>(t.cell_count()));
  const int rank = static_cast<int>(a.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < b.rows(); ++j)
      for (std::int64_t k = 0; k < c.rows(); ++k) {
        double v = 0.0;
        for (int s = 0; s < rank; ++s) v += a(i, s) * b(j, s) * c(k, s);
        if (spec.nonlinearity == SynthNonlinearity::tanh_warp) v = std::tanh(v);
        if (spec.noise_std > 0.0) v += spec.noise_std * gaussian(noise_rng);
        t.entries.push_back({static_cast<std::int32_t>(i),
                             static_cast<std::int32_t>(j),
                             static_cast<std::int32_t>(k), v});
      }
  return t;
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
  spec.validate();

  // One engine, fixed draw order: factors u, v, t (, w), then X noise,
  // then Y noise.  Everything downstream of the seed is pinned.
  std::mt19937_64 rng(spec.seed);
  SynthData data;
  data.spec = spec;
  data.u = draw_factor(spec.dims[0], spec.true_rank, rng);
  data.v = draw_factor(spec.dims[1], spec.true_rank, rng);
  data.t = draw_factor(spec.dims[2], spec.true_rank, rng);
  if (spec.coupled) data.w = draw_factor(spec.dims[3], spec.true_rank, rng);

  data.x = expand(data.u, data.v, data.t, spec, rng, "synthetic.x");
  if (spec.coupled) data.y = expand(data.u, data.v, data.w, spec, rng, "synthetic.y");
  return data;
}

SparseTensor3 mask(const SparseTensor3& t, double target_sparsity,
                   std::uint64_t seed) {
  if (!(target_sparsity >= 0.0 && target_sparsity < 1.0))
    throw ConfigError("target sparsity must lie in [0, 1)");
  const double cells = static_cast<double>(t.cell_count());
  // ceil with a tiny slack so keep-counts at representable fractions
  // (0.9 * 1000 and friends) do not round up spuriously.
  const double want = (1.0 - target_sparsity) * cells;
  std::size_t keep = static_cast<std::size_t>(std::ceil(want - 1e-12));
  if (keep > t.entries.size()) keep = t.entries.size();
  if (keep == 0)
    throw MaskError("sparsity " + std::to_string(target_sparsity) +
                    " would keep no entries");

  // One permutation per (tensor, seed); a higher sparsity keeps a prefix
  // of the lower-sparsity selection, so masks are nested.
  std::mt19937_64 rng(seed);
  const std::vector<std::size_t> perm = permutation(t.entries.size(), rng);

  SparseTensor3 out;
  out.dims = t.dims;
  out.name = t.name;
  out.entries.reserve(keep);
  for (std::size_t q = 0; q < keep; ++q) out.entries.push_back(t.entries[perm[q]]);
  out.sort_entries();
  return out;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& params, double step) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  Eigen::VectorXd grad(params.size());
  Eigen::VectorXd probe = params;
  for (Eigen::Index q = 0; q < params.size(); ++q) {
    const double x0 = params(q);
    probe(q) = x0 + step;
    const double hi = f(probe);
    probe(q) = x0 - step;
    const double lo = f(probe);
    probe(q) = x0;
    grad(q) = (hi - lo) / (2.0 * step);
  }
  return grad;
}

std::vector<double> dense_reconstruct(const SingleModel& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.dims[0] * m.dims[1] * m.dims[2]));
  for (int i = 0; i < m.dims[0]; ++i)
    for (int j = 0; j < m.dims[1]; ++j)
      for (int k = 0; k < m.dims[2]; ++k)
        out.push_back(predict(m, TensorTag::X, i, j, k));
  return out;
}

std::vector<double> dense_reconstruct(const CoupledModel& m, TensorTag tag) {
  const std::int64_t d3 = tag == TensorTag::X ? m.dims[2] : m.dims[3];
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.dims[0] * m.dims[1] * d3));
  for (int i = 0; i < m.dims[0]; ++i)
    for (int j = 0; j < m.dims[1]; ++j)
      for (int k = 0; k < d3; ++k) out.push_back(predict(m, tag, i, j, k));
  return out;
}

std::string matrix_checksum(const Eigen::MatrixXd& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t q = 0; q < len; ++q) {
      h ^= bytes[q];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  mix(shape, sizeof(shape));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      mix(&v, sizeof(v));
    }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mlctr

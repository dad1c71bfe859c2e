#include "mlctr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "mlctr/errors.hpp"
#include "mlctr/rng.hpp"

namespace mlctr {

namespace {

// Packs a triple into one 64-bit key for duplicate detection.  Extents are
// checked against 2^21 when this is used, so the packing cannot collide.
std::uint64_t pack_triple(std::int64_t i, std::int64_t j, std::int64_t k) {
  return (static_cast<std::uint64_t>(i) << 42) |
         (static_cast<std::uint64_t>(j) << 21) |
         static_cast<std::uint64_t>(k);
}

constexpr std::int64_t kMaxExtent = std::int64_t{1} << 21;

}  // namespace

std::int64_t SparseTensor3::cell_count() const {
  std::int64_t n = 1;
  for (const std::int64_t d : dims) {
    if (d <= 0) throw ConfigError("tensor extents must be positive");
    if (n > std::numeric_limits<std::int64_t>::max() / d)
      throw ConfigError("tensor cell count overflows");
    n *= d;
  }
  return n;
}

void SparseTensor3::validate() const {
  cell_count();
  for (const std::int64_t d : dims)
    if (d > kMaxExtent) throw ConfigError("tensor extent exceeds supported maximum");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(entries.size() * 2);
  for (const Entry& e : entries) {
    if (e.i < 0 || e.i >= dims[0] || e.j < 0 || e.j >= dims[1] || e.k < 0 ||
        e.k >= dims[2])
      throw BoundsError("entry (" + std::to_string(e.i) + ", " +
                        std::to_string(e.j) + ", " + std::to_string(e.k) +
                        ") outside extents");
    if (!seen.insert(pack_triple(e.i, e.j, e.k)).second)
      throw DuplicateError("duplicate entry (" + std::to_string(e.i) + ", " +
                           std::to_string(e.j) + ", " + std::to_string(e.k) +
                           ")");
  }
}

void SparseTensor3::sort_entries() {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) {
              if (a.i != b.i) return a.i < b.i;
              if (a.j != b.j) return a.j < b.j;
              return a.k < b.k;
            });
}

SparseTensor3 load_coo(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  SparseTensor3 t;
  t.name = path;
  bool have_header = false;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& what) -> std::string {
    return path + ":" + std::to_string(line_no) + ": " + what;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    // Whitespace-only lines are also skipped.
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::istringstream ls(line);
    if (!have_header) {
      std::int64_t d1, d2, d3;
      if (!(ls >> d1 >> d2 >> d3)) throw ParseError(fail("bad header, expected 'd1 d2 d3'"));
      std::string extra;
      if (ls >> extra) throw ParseError(fail("trailing tokens after header"));
      if (d1 <= 0 || d2 <= 0 || d3 <= 0)
        throw ParseError(fail("extents must be positive"));
      if (d1 > kMaxExtent || d2 > kMaxExtent || d3 > kMaxExtent)
        throw ParseError(fail("extent exceeds supported maximum"));
      t.dims = {d1, d2, d3};
      t.cell_count();  // overflow check
      have_header = true;
      continue;
    }

    std::int64_t i, j, k;
    double v;
    if (!(ls >> i >> j >> k >> v)) throw ParseError(fail("expected 'i j k value'"));
    std::string extra;
    if (ls >> extra) throw ParseError(fail("trailing tokens after value"));
    if (i < 0 || i >= t.dims[0] || j < 0 || j >= t.dims[1] || k < 0 || k >= t.dims[2])
      throw BoundsError(fail("index outside extents"));
    if (!seen.insert(pack_triple(i, j, k)).second)
      throw DuplicateError(fail("duplicate entry"));
    t.entries.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(j),
                         static_cast<std::int32_t>(k), v});
  }

  if (!have_header) throw ParseError(path + ": missing header line");
  return t;
}

void save_coo(const SparseTensor3& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << t.dims[0] << ' ' << t.dims[1] << ' ' << t.dims[2] << '\n';
  char buf[64];
  for (const SparseTensor3::Entry& e : t.entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.value);
    out << e.i << ' ' << e.j << ' ' << e.k << ' ' << buf << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

double sparsity(const SparseTensor3& t) {
  const auto cells = static_cast<double>(t.cell_count());
  return 1.0 - static_cast<double>(t.entries.size()) / cells;
}

std::pair<SparseTensor3, Standardizer> standardize(const SparseTensor3& t) {
  if (t.entries.empty()) throw UsageError("standardize: tensor has no entries");
  const double n = static_cast<double>(t.entries.size());

  double mean = 0.0;
  for (const auto& e : t.entries) mean += e.value;
  mean /= n;

  double var = 0.0;
  for (const auto& e : t.entries) {
    const double d = e.value - mean;
    var += d * d;
  }
  var /= n;  // population variance

  Standardizer st;
  st.mean = mean;
  st.stddev = std::sqrt(var);
  // Guard against an all-equal tensor where rounding leaves a tiny but
  // nonzero stddev; dividing by it would blow the values up.
  if (st.stddev < 1e-12 * std::max(1.0, std::abs(mean))) {
    st.stddev = 1.0;
    st.degenerate = true;
  }

  SparseTensor3 out = t;
  for (auto& e : out.entries) e.value = st.transform(e.value);
  return {std::move(out), st};
}

void SplitSpec::validate() const {
  const double fracs[3] = {train_frac, val_frac, test_frac};
  for (const double f : fracs)
    if (!(f > 0.0 && f < 1.0))
      throw ConfigError("split fractions must lie in (0, 1)");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-12)
    throw ConfigError("split fractions must sum to 1");
}

Split split(const SparseTensor3& t, const SplitSpec& spec) {
  spec.validate();
  if (t.entries.empty()) throw UsageError("split: tensor has no entries");
  const std::size_t n = t.entries.size();

  // Largest-remainder apportionment; ties go to the earlier part, so the
  // priority is train, then val, then test.
  const double fracs[3] = {spec.train_frac, spec.val_frac, spec.test_frac};
  std::size_t sizes[3];
  double rem[3];
  std::size_t assigned = 0;
  for (int p = 0; p < 3; ++p) {
    const double exact = static_cast<double>(n) * fracs[p];
    sizes[p] = static_cast<std::size_t>(std::floor(exact));
    rem[p] = exact - std::floor(exact);
    assigned += sizes[p];
  }
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3, [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t extra = n - assigned, q = 0; q < extra; ++q) ++sizes[order[q]];

  for (int p = 0; p < 3; ++p)
    if (sizes[p] == 0)
      throw SplitError("split leaves the " +
                       std::string(p == 0 ? "train" : p == 1 ? "val" : "test") +
                       " part empty (" + std::to_string(n) + " entries)");

  std::mt19937_64 rng(spec.seed);
  const std::vector<std::size_t> perm = permutation(n, rng);

  Split out;
  SparseTensor3* parts[3] = {&out.train, &out.val, &out.test};
  const char* suffix[3] = {".train", ".val", ".test"};
  std::size_t pos = 0;
  for (int p = 0; p < 3; ++p) {
    parts[p]->dims = t.dims;
    parts[p]->name = t.name + suffix[p];
    parts[p]->entries.reserve(sizes[p]);
    for (std::size_t q = 0; q < sizes[p]; ++q)
      parts[p]->entries.push_back(t.entries[perm[pos++]]);
  }
  return out;
}

}  // namespace mlctr

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mlctr {

// Third-order sparse tensor in coordinate form.  Only observed cells are
// stored; indices are 0-based and unique.
struct SparseTensor3 {
  struct Entry {
    std::int32_t i = 0;
    std::int32_t j = 0;
    std::int32_t k = 0;
    double value = 0.0;
  };

  std::array<std::int64_t, 3> dims{0, 0, 0};
  std::vector<Entry> entries;
  std::string name;

  // Total number of cells, observed or not.  Throws ConfigError on overflow.
  std::int64_t cell_count() const;

  // Checks positive dims, in-range indices and uniqueness of triples.
  void validate() const;

  // Sorts entries lexicographically by (i, j, k).
  void sort_entries();
};

// Text COO format: first non-comment line is "d1 d2 d3", every following
// line is "i j k value".  Lines starting with '#' and blank lines are
// skipped.  Throws ParseError / BoundsError / DuplicateError with the
// offending 1-based line number, IoError if the file cannot be read.
SparseTensor3 load_coo(const std::string& path);

// Inverse of load_coo; values are written with 17 significant digits so a
// round trip is bit-exact.  Throws IoError on write failure.
void save_coo(const SparseTensor3& t, const std::string& path);

// Fraction of unobserved cells: 1 - entries / cells.
double sparsity(const SparseTensor3& t);

// Affine map v -> (v - mean) / stddev fitted on observed entries.
struct Standardizer {
  double mean = 0.0;
  double stddev = 1.0;
  // All observed values were (numerically) equal; stddev is forced to 1.
  bool degenerate = false;

  double transform(double v) const { return (v - mean) / stddev; }
  double inverse(double v) const { return v * stddev + mean; }
};

// Fits mean and population standard deviation on all observed entries and
// returns the transformed tensor together with the fitted map.  Always fit
// before splitting so every part shares the same scale.  Throws UsageError
// on an empty tensor.
std::pair<SparseTensor3, Standardizer> standardize(const SparseTensor3& t);

struct SplitSpec {
  double train_frac = 0.72;
  double val_frac = 0.08;
  double test_frac = 0.20;
  std::uint64_t seed = 0;

  // Fractions must lie in (0,1) and sum to 1 (within 1e-12).
  void validate() const;
};

struct Split {
  SparseTensor3 train;
  SparseTensor3 val;
  SparseTensor3 test;
};

// Disjoint train/val/test partition of the observed entries.  Part sizes
// are n*frac rounded by largest remainder (ties resolved train, val, test),
// assignment order is a seeded permutation.  Throws SplitError if any part
// would be empty.
Split split(const SparseTensor3& t, const SplitSpec& spec);

}  // namespace mlctr

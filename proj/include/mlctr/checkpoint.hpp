#pragma once

#include <string>
#include <variant>

#include "mlctr/model.hpp"
#include "mlctr/tensor.hpp"

namespace mlctr {

// Format tag written as the first line of every checkpoint; bump on any
// layout change so old readers fail loudly instead of misparsing.
inline constexpr const char* kCheckpointFormat = "mlctr-checkpoint-v1";

// Everything needed to score new cells: the model plus the standardizers
// that map between original and training units.
struct Checkpoint {
  std::variant<SingleModel, CoupledModel> model;
  Standardizer std_x;
  Standardizer std_y;  // only meaningful for coupled models

  bool coupled() const { return std::holds_alternative<CoupledModel>(model); }
};

// Plain-text, line-oriented serialization.  Values use 17 significant
// digits, so save/load round-trips bit-exactly.  The file is written to a
// temporary sibling and renamed into place.  Throws IoError on write
// failure, FormatError / ParseError on bad input.
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mlctr

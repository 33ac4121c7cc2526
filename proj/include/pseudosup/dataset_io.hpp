#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "pseudosup/data.hpp"

namespace pseudosup {

// Line format:
//   gdp-synth v1
//   n_features <n>
//   grid <h> <w>                       (optional)
//   <trainL|trainU|val|test> <id> <label-or-?> <f0> ... <f{n-1}>
// A trainU row may carry its hidden ground truth in the label column.

void save_dataset(std::ostream& os, const DatasetSplits& splits);
DatasetSplits load_dataset(std::istream& is);

void save_dataset(const std::string& path, const DatasetSplits& splits);
DatasetSplits load_dataset(const std::string& path);

std::string serialize_dataset(const DatasetSplits& splits);

/// FNV-1a over the serialized splits; equal splits give equal hashes.
std::uint64_t split_hash(const DatasetSplits& splits);

}  // namespace pseudosup

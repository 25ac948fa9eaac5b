#pragma once

#include <cstddef>
#include <vector>

namespace grpokit {

/// Maximum-weight bipartite matching (Hungarian method, O(n^3)) on a dense
/// rows x cols weight matrix. Returns, for each row, the matched column or -1
/// when the row is left unmatched (only possible when rows > cols).
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights);

}  // namespace grpokit

#pragma once

#include <cstddef>
#include <random>
#include <vector>

namespace churn {

/// Draws `count` distinct items uniformly (partial Fisher-Yates), in draw
/// order.  Throws std::invalid_argument when count exceeds items.size().
std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> items,
                                                  std::size_t count, std::mt19937_64& rng);

}  // namespace churn

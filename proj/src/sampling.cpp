#include "churn/sampling.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace churn {

std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> items,
                                                  std::size_t count, std::mt19937_64& rng) {
  if (count > items.size())
    throw std::invalid_argument("cannot draw " + std::to_string(count) + " of " +
                                std::to_string(items.size()) + " items");
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(count);
  return items;
}

}  // namespace churn

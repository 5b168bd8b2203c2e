#pragma once

#include <map>
#include <string>

#include "lectio/provider.hpp"

namespace lectio::testing {

// Position probabilities looked up per word surface; lets tests state
// pseudo-likelihood factors directly.
class TableProvider final : public Provider {
 public:
  explicit TableProvider(std::map<std::string, double> table) : table_(std::move(table)) {}

  std::string name() const override { return "table"; }
  Capabilities capabilities() const override { return {false, true, false}; }
  PositionProbabilities position_probabilities(std::string_view,
                                               std::span<const std::string> context) const override {
    PositionProbabilities out;
    for (const auto& w : context) out.per_position.push_back(table_.at(w));
    return out;
  }

 private:
  std::map<std::string, double> table_;
};

}  // namespace lectio::testing

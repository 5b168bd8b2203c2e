#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lectio/vocabulary.hpp"

namespace lectio {

struct Candidate {
  WordId id = 0;
  std::size_t distance = 0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// The Levenshtein neighborhood of `center` inside a vocabulary, sorted by
// (distance, id).
struct CandidateSet {
  std::string center;
  std::size_t radius = 0;
  std::vector<Candidate> members;

  bool empty() const noexcept { return members.empty(); }
  std::size_t size() const noexcept { return members.size(); }
  bool contains(WordId id) const;
};

// Codepoint trie over a vocabulary, queried with a row-by-row edit-distance
// walk that prunes any branch whose best row entry already exceeds k.
class NeighborIndex {
 public:
  static constexpr std::size_t kDefaultMaxRadius = 2;

  // Throws Error(kBuild) for an empty vocabulary.
  static NeighborIndex build(std::shared_ptr<const Vocabulary> vocab,
                             std::size_t max_radius = kDefaultMaxRadius);

  // Exact neighborhood. Throws Error(kUnsupportedRadius) when k > max_radius().
  CandidateSet neighbors(std::string_view center, std::size_t k) const;

  std::size_t max_radius() const noexcept { return max_radius_; }
  const Vocabulary& vocabulary() const noexcept { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const noexcept { return vocab_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    char32_t label = 0;
    std::int64_t word = -1;
    std::uint32_t first_child = 0;
    std::uint32_t child_count = 0;
  };

  void search(std::uint32_t node, std::size_t depth, const std::u32string& center,
              std::size_t k, std::vector<std::size_t>& rows,
              std::vector<Candidate>& out) const;

  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<Node> nodes_;  // children of a node are contiguous, sorted by label
  std::size_t max_radius_ = kDefaultMaxRadius;
};

}  // namespace lectio

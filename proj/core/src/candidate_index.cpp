#include "lectio/candidate_index.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "lectio/error.hpp"

namespace lectio {

bool CandidateSet::contains(WordId id) const {
  return std::any_of(members.begin(), members.end(),
                     [id](const Candidate& c) { return c.id == id; });
}

namespace {

// Pointer trie used only during construction.
struct BuildNode {
  std::int64_t word = -1;
  std::map<char32_t, std::unique_ptr<BuildNode>> children;
};

}  // namespace

NeighborIndex NeighborIndex::build(std::shared_ptr<const Vocabulary> vocab,
                                   std::size_t max_radius) {
  if (!vocab || vocab->empty()) {
    throw Error(ErrorCode::kBuild, "cannot build a neighbor index over an empty vocabulary");
  }
  BuildNode root;
  for (WordId id = 0; id < vocab->size(); ++id) {
    BuildNode* node = &root;
    for (char32_t c : decode_utf8(vocab->word(id))) {
      auto& child = node->children[c];
      if (!child) child = std::make_unique<BuildNode>();
      node = child.get();
    }
    node->word = id;
  }

  NeighborIndex index;
  index.vocab_ = std::move(vocab);
  index.max_radius_ = max_radius;
  // Breadth-first flattening keeps siblings contiguous.
  std::vector<const BuildNode*> queue{&root};
  index.nodes_.push_back(Node{0, root.word, 0, 0});
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const BuildNode* b = queue[head];
    index.nodes_[head].first_child = static_cast<std::uint32_t>(index.nodes_.size());
    index.nodes_[head].child_count = static_cast<std::uint32_t>(b->children.size());
    for (const auto& [label, child] : b->children) {
      index.nodes_.push_back(Node{label, child->word, 0, 0});
      queue.push_back(child.get());
    }
  }
  return index;
}

void NeighborIndex::search(std::uint32_t node, std::size_t depth, const std::u32string& center,
                           std::size_t k, std::vector<std::size_t>& rows,
                           std::vector<Candidate>& out) const {
  const std::size_t width = center.size() + 1;
  const Node& n = nodes_[node];
  for (std::uint32_t c = n.first_child; c < n.first_child + n.child_count; ++c) {
    const Node& child = nodes_[c];
    const std::size_t prev = depth * width;
    const std::size_t cur = prev + width;
    if (rows.size() < cur + width) rows.resize(cur + width);
    rows[cur] = rows[prev] + 1;
    std::size_t best = rows[cur];
    for (std::size_t j = 1; j < width; ++j) {
      const std::size_t sub = rows[prev + j - 1] + (center[j - 1] == child.label ? 0 : 1);
      rows[cur + j] = std::min({rows[prev + j] + 1, rows[cur + j - 1] + 1, sub});
      best = std::min(best, rows[cur + j]);
    }
    if (child.word >= 0 && rows[cur + width - 1] <= k) {
      out.push_back(Candidate{static_cast<WordId>(child.word), rows[cur + width - 1]});
    }
    if (best <= k) search(c, depth + 1, center, k, rows, out);
  }
}

CandidateSet NeighborIndex::neighbors(std::string_view center, std::size_t k) const {
  if (k > max_radius_) {
    throw Error(ErrorCode::kUnsupportedRadius,
                "radius " + std::to_string(k) + " exceeds the index build radius " +
                    std::to_string(max_radius_));
  }
  CandidateSet set;
  set.center = std::string(center);
  set.radius = k;

  const std::u32string target = decode_utf8(center);
  std::vector<std::size_t> rows(target.size() + 1);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (nodes_[0].word >= 0 && target.size() <= k) {
    set.members.push_back(Candidate{static_cast<WordId>(nodes_[0].word), target.size()});
  }
  search(0, 0, target, k, rows, set.members);

  std::sort(set.members.begin(), set.members.end(), [](const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  return set;
}

}  // namespace lectio

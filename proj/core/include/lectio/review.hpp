#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lectio/dataset.hpp"
#include "lectio/detectors.hpp"
#include "lectio/document.hpp"

namespace lectio {

// A label submission from the reviewer.
struct LabelSubmission {
  std::string doc_id;
  std::size_t word_index = 0;
  Label label = Label::kNonError;
  std::optional<ErrorCategory> category;
  std::string notes;
  std::optional<std::string> suggested_alternative;
  // Token last seen by the client. Unset is only accepted for items that
  // have never been labeled.
  std::optional<std::string> revision;
};

struct QueueItem {
  std::size_t rank = 0;  // position in the ranked score list
  const ErrorScore* score = nullptr;
};

// Holds the ranked flags and the label set. Labels go to an append-only
// journal next to the dataset (`<dataset>.journal`) and are folded into the
// dataset file by compact().
class ReviewStore {
 public:
  // Loads the dataset (if the file exists) and replays the journal. A torn
  // final journal line is dropped; corruption elsewhere throws.
  ReviewStore(std::vector<ErrorScore> ranked, std::vector<Document> docs,
              std::filesystem::path dataset,
              NormalizationPolicy policy = NormalizationPolicy::kCompose);

  static std::filesystem::path journal_path(const std::filesystem::path& dataset);

  struct Page {
    std::size_t total = 0;  // unlabeled items matching the filter
    std::vector<QueueItem> items;
  };
  // Unlabeled ranked items in rank order; `doc_filter` keeps one document.
  Page queue(std::size_t offset, std::size_t limit,
             const std::optional<std::string>& doc_filter = std::nullopt) const;

  struct ItemView {
    std::string doc_id;
    std::size_t word_index = 0;
    std::string surface;
    std::optional<double> score;
    std::optional<std::size_t> rank;
    std::optional<std::string> best_alternative;
    std::string left_context;
    std::string right_context;
    std::string revision;
    std::optional<LabeledExample> label;
  };
  // Throws Error(kQuery) for unknown documents or indices.
  ItemView item(const std::string& doc_id, std::size_t word_index,
                std::size_t window = 100) const;

  // Durable once this returns (journal fsync). Throws Error(kConflict) for a
  // stale revision, Error(kSchema) for an invalid label, Error(kQuery) for an
  // unknown or punctuation word. Returns the new revision token.
  std::string submit(const LabelSubmission& submission);

  // Current label set: dataset rows in file order, new items after them.
  std::vector<LabeledExample> labels() const;
  std::string export_jsonl() const;

  // Rewrites the dataset atomically and removes the journal.
  void compact();

  std::size_t journal_entries() const;

 private:
  using Key = std::pair<std::string, std::size_t>;

  void apply(LabeledExample example, std::size_t revision);
  std::string revision_of(const Key& key) const;

  std::vector<ErrorScore> ranked_;
  std::map<Key, std::size_t> rank_of_;
  std::map<std::string, Document> docs_;
  std::filesystem::path dataset_;
  NormalizationPolicy policy_;

  std::vector<LabeledExample> rows_;
  std::map<Key, std::size_t> row_of_;
  std::map<Key, std::size_t> revisions_;
  std::size_t journal_entries_ = 0;
  mutable std::mutex mu_;
};

struct ReviewServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;
  // When set, every /api request must carry it in X-Review-Secret.
  std::optional<std::string> shared_secret;
};

class ReviewServer {
 public:
  ReviewServer(std::shared_ptr<ReviewStore> store, ReviewServerOptions options);
  ~ReviewServer();

  // Throws Error(kIo) if the address cannot be bound. Returns the port.
  int bind();
  // Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lectio

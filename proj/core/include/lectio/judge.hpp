#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "lectio/dataset.hpp"
#include "lectio/detectors.hpp"

namespace lectio {

inline constexpr std::string_view kJudgePromptVersion = "judge-prompt/v1";

struct Exemplar {
  std::string context;  // passage containing the target once
  std::string target;
  Label label = Label::kNonError;
  std::string note;
};

struct JudgeConfig {
  int m = 5;
  std::vector<Exemplar> exemplars;
  std::string endpoint;
  std::string model = "gpt-4";
  std::string api_key;
  double temperature = 1.0;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds backoff{500};  // doubled on every retry
  std::size_t window = 50;                 // words either side of the target
  std::size_t max_in_flight = 4;

  // Throws Error(kConfig).
  void validate() const;
};

// One exemplar per line: {"context", "target", "label", "note"}.
std::vector<Exemplar> load_exemplars(const std::filesystem::path& path);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string correlation_id;
  std::string model;
  double temperature = 1.0;
  std::vector<ChatMessage> messages;
};

struct ChatResponse {
  std::string correlation_id;
  int status = 200;
  std::string content;  // assistant message on success, body excerpt otherwise
  std::optional<std::chrono::milliseconds> retry_after;
};

// Connection failures throw Error(kTransport); HTTP failures come back as a
// non-2xx status.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

// OpenAI-style chat-completions endpoint.
class HttpTransport : public ChatTransport {
 public:
  HttpTransport(std::string endpoint, std::string api_key, std::chrono::milliseconds timeout);
  ChatResponse send(const ChatRequest& request) override;

 private:
  std::string origin_;
  std::string path_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
};

// JUDGE_ENDPOINT / JUDGE_API_KEY, falling back to the config fields. Throws
// Error(kConfig) before any network traffic when either is missing.
std::unique_ptr<ChatTransport> make_http_transport(const JudgeConfig& config);

// Key used to match a request against the audit log: hash of model,
// temperature and messages (not the correlation id).
std::string request_key(const ChatRequest& request);

// Forwards to `inner` and appends every exchange to a JSON-lines audit file.
class RecordingTransport : public ChatTransport {
 public:
  RecordingTransport(std::unique_ptr<ChatTransport> inner, const std::filesystem::path& audit);
  ChatResponse send(const ChatRequest& request) override;

 private:
  std::unique_ptr<ChatTransport> inner_;
  std::filesystem::path audit_;
  std::mutex mu_;
};

// Replays an audit file. Repeated identical requests get the recorded
// replies in order, the last one sticking. Misses throw Error(kTransport).
class ReplayTransport : public ChatTransport {
 public:
  explicit ReplayTransport(const std::filesystem::path& audit);
  ChatResponse send(const ChatRequest& request) override;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<ChatResponse> replies;
    std::size_t next = 0;
  };
  std::map<std::string, Entry> entries_;
  std::mutex mu_;
};

struct JudgeVerdict {
  std::string raw_reply;
  std::optional<int> score;  // in [1, m]; empty means abstain
  std::string rationale;

  bool abstained() const { return !score.has_value(); }
};

// Passage of `window` words either side with the target wrapped in [[ ]].
std::string context_window(std::span<const std::string> words, std::size_t index,
                           std::size_t window);

std::vector<ChatMessage> build_prompt(const JudgeConfig& config, std::span<const std::string> words,
                                      std::size_t index);

// First integer in [1, m] after a "score" marker; a reply that is nothing
// but such an integer also counts.
std::optional<int> parse_score(std::string_view reply, int m);

// (s - 1) / (m - 1); abstentions map to the midpoint.
double rescale_score(std::optional<int> score, int m);

class Judge {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  // `sleeper` defaults to std::this_thread::sleep_for.
  Judge(JudgeConfig config, std::shared_ptr<ChatTransport> transport, Sleeper sleeper = {});

  // Throws Error(kTransport) once retries are exhausted and Error(kStatus)
  // for non-retryable HTTP failures.
  JudgeVerdict judge(std::span<const std::string> words, std::size_t index,
                     std::string_view correlation_id) const;

  const JudgeConfig& config() const { return config_; }
  std::string fingerprint() const;

 private:
  ChatResponse exchange(ChatRequest request) const;

  JudgeConfig config_;
  std::shared_ptr<ChatTransport> transport_;
  Sleeper sleeper_;
  mutable std::counting_semaphore<1024> in_flight_;
};

// Scores on the [0, 1] scale; abstentions are 0.5 with `abstained` set.
std::unique_ptr<Detector> make_llm_detector(std::shared_ptr<const Judge> judge);

}  // namespace lectio

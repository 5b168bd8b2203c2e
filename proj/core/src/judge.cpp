#include "lectio/judge.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include "json.hpp"
#include "lectio/error.hpp"
#include "lectio/hash.hpp"
#include "parse_util.hpp"

namespace lectio {

using nlohmann::ordered_json;

void JudgeConfig::validate() const {
  if (m < 2) throw Error(ErrorCode::kConfig, "judge scale top m must be at least 2");
  if (exemplars.empty()) throw Error(ErrorCode::kConfig, "judge needs at least one exemplar");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::kConfig, "judge temperature must be >= 0");
  if (max_retries < 0) throw Error(ErrorCode::kConfig, "judge max_retries must be >= 0");
  if (max_in_flight == 0 || max_in_flight > 1024) {
    throw Error(ErrorCode::kConfig, "judge max_in_flight must be in [1, 1024]");
  }
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open exemplars " + path.string());
  std::vector<Exemplar> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::chomp(line);
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      Exemplar e;
      e.context = j.at("context").get<std::string>();
      e.target = j.at("target").get<std::string>();
      e.label = parse_label(j.at("label").get<std::string>());
      e.note = j.value("note", "");
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw Error(ErrorCode::kParse, detail::where(path, line_no) + ex.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transports

HttpTransport::HttpTransport(std::string endpoint, std::string api_key,
                             std::chrono::milliseconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint, m, kUrl)) {
    throw Error(ErrorCode::kConfig, "judge endpoint is not an http(s) URL: " + endpoint);
  }
  origin_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/v1/chat/completions";
}

ChatResponse HttpTransport::send(const ChatRequest& request) {
  ordered_json body;
  body["model"] = request.model;
  body["temperature"] = request.temperature;
  body["messages"] = ordered_json::array();
  for (const auto& msg : request.messages) {
    body["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
  }

  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_).count();
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);
  httplib::Headers headers = {{"Authorization", "Bearer " + api_key_},
                              {"X-Correlation-Id", request.correlation_id}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kTransport,
                "request " + request.correlation_id + " to " + origin_ + path_ +
                    " failed: " + httplib::to_string(res.error()));
  }

  ChatResponse out;
  out.correlation_id = request.correlation_id;
  out.status = res->status;
  if (res->has_header("Retry-After")) {
    const auto v = std::atof(res->get_header_value("Retry-After").c_str());
    if (v > 0) out.retry_after = std::chrono::milliseconds(static_cast<long>(v * 1000));
  }
  if (res->status < 200 || res->status >= 300) {
    out.content = res->body.substr(0, 300);
    return out;
  }
  try {
    const auto j = ordered_json::parse(res->body);
    out.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception& ex) {
    throw Error(ErrorCode::kTransport, "request " + request.correlation_id +
                                           ": malformed completion body: " + ex.what());
  }
  return out;
}

std::unique_ptr<ChatTransport> make_http_transport(const JudgeConfig& config) {
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? v : "";
  };
  std::string endpoint = env("JUDGE_ENDPOINT");
  if (endpoint.empty()) endpoint = config.endpoint;
  std::string key = env("JUDGE_API_KEY");
  if (key.empty()) key = config.api_key;
  if (endpoint.empty()) throw Error(ErrorCode::kConfig, "JUDGE_ENDPOINT is not set");
  if (key.empty()) throw Error(ErrorCode::kConfig, "JUDGE_API_KEY is not set");
  return std::make_unique<HttpTransport>(endpoint, key, config.timeout);
}

namespace {

ordered_json request_json(const ChatRequest& request) {
  ordered_json j;
  j["model"] = request.model;
  j["temperature"] = request.temperature;
  j["messages"] = ordered_json::array();
  for (const auto& msg : request.messages) {
    j["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
  }
  return j;
}

}  // namespace

std::string request_key(const ChatRequest& request) {
  return sha256_hex(request_json(request).dump());
}

RecordingTransport::RecordingTransport(std::unique_ptr<ChatTransport> inner,
                                       const std::filesystem::path& audit)
    : inner_(std::move(inner)), audit_(audit) {}

ChatResponse RecordingTransport::send(const ChatRequest& request) {
  ChatResponse res = inner_->send(request);
  ordered_json line;
  line["key"] = request_key(request);
  line["correlation_id"] = request.correlation_id;
  line["request"] = request_json(request);
  line["status"] = res.status;
  line["reply"] = res.content;
  std::lock_guard lock(mu_);
  std::ofstream out(audit_, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to audit log " + audit_.string());
  out << line.dump() << '\n';
  out.flush();
  return res;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& audit) {
  std::ifstream in(audit);
  if (!in) throw Error(ErrorCode::kIo, "cannot open audit log " + audit.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::chomp(line);
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      ChatResponse res;
      res.status = j.at("status").get<int>();
      res.content = j.at("reply").get<std::string>();
      entries_[j.at("key").get<std::string>()].replies.push_back(std::move(res));
    } catch (const std::exception& ex) {
      throw Error(ErrorCode::kParse, detail::where(audit, line_no) + ex.what());
    }
  }
}

ChatResponse ReplayTransport::send(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(request_key(request));
  if (it == entries_.end()) {
    throw Error(ErrorCode::kTransport,
                "request " + request.correlation_id + " is not in the audit log");
  }
  Entry& e = it->second;
  ChatResponse res = e.replies[std::min(e.next, e.replies.size() - 1)];
  if (e.next < e.replies.size()) ++e.next;
  res.correlation_id = request.correlation_id;
  return res;
}

// ---------------------------------------------------------------------------
// Prompt and parsing

std::string context_window(std::span<const std::string> words, std::size_t index,
                           std::size_t window) {
  if (index >= words.size()) {
    throw Error(ErrorCode::kQuery, "target index " + std::to_string(index) +
                                       " outside passage of " + std::to_string(words.size()) +
                                       " words");
  }
  const std::size_t lo = index > window ? index - window : 0;
  const std::size_t hi = std::min(words.size(), index + window + 1);
  std::string out;
  for (std::size_t i = lo; i < hi; ++i) {
    if (!out.empty()) out += ' ';
    if (i == index) {
      out += "[[" + words[i] + "]]";
    } else {
      out += words[i];
    }
  }
  return out;
}

namespace {

int exemplar_score(Label label, int m) {
  switch (label) {
    case Label::kError: return m;
    case Label::kNonError: return 1;
    case Label::kPlausible: return m - 1;
    case Label::kUncertain: return (m + 1) / 2;
  }
  return 1;
}

std::string scale_sentence(int m) {
  return "Rate it on a scale of 1 to " + std::to_string(m) +
         ", where 1 means the word is certainly correct and " + std::to_string(m) +
         " means it is certainly an error.";
}

}  // namespace

std::vector<ChatMessage> build_prompt(const JudgeConfig& config, std::span<const std::string> words,
                                      std::size_t index) {
  std::string system =
      "You help a philologist check transmitted texts for copying errors introduced by "
      "scribes, printers or digitization.";

  std::string user;
  user += "You will see a passage with one target word marked as [[word]]. ";
  user += "Decide whether the target word is an error that entered the text during its "
          "transmission. ";
  user += scale_sentence(config.m) + "\n\n";
  for (std::size_t i = 0; i < config.exemplars.size(); ++i) {
    const Exemplar& e = config.exemplars[i];
    user += "Example " + std::to_string(i + 1) + "\n";
    user += "Passage: " + e.context + "\n";
    user += "Target: " + e.target + "\n";
    user += "Expert label: " + std::string(to_string(e.label)) + "\n";
    if (!e.note.empty()) user += "Expert note: " + e.note + "\n";
    user += "Score: " + std::to_string(exemplar_score(e.label, config.m)) + "\n\n";
  }
  user += "Passage to judge\n";
  user += "Passage: " + context_window(words, index, config.window) + "\n";
  user += "Target: " + words[index] + "\n";
  user += "Answer with \"Score: <integer>\" followed by one sentence of rationale.";
  return {{"system", std::move(system)}, {"user", std::move(user)}};
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Integer runs in [1, m] starting at or after `from`, returning the first
// and where it ends.
std::optional<std::pair<int, std::size_t>> first_in_range(std::string_view s, std::size_t from,
                                                          int m) {
  for (std::size_t i = from; i < s.size();) {
    if (!is_digit(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_digit(s[j])) ++j;
    const bool part_of_decimal = (j < s.size() && s[j] == '.' && j + 1 < s.size() &&
                                  is_digit(s[j + 1])) ||
                                 (i > 0 && s[i - 1] == '.' && i > 1 && is_digit(s[i - 2]));
    if (!part_of_decimal && j - i <= 3) {
      const int v = std::stoi(std::string(s.substr(i, j - i)));
      if (v >= 1 && v <= m) return std::make_pair(v, j);
    }
    i = j;
  }
  return std::nullopt;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<int> parse_score(std::string_view reply, int m) {
  const std::string low = lower(reply);
  const auto marker = low.find("score");
  if (marker != std::string::npos) {
    if (auto hit = first_in_range(reply, marker + 5, m)) return hit->first;
    return std::nullopt;
  }
  std::string_view bare = trim(reply);
  if (!bare.empty() && bare.back() == '.') bare.remove_suffix(1);
  if (!bare.empty() && bare.size() <= 3 && std::all_of(bare.begin(), bare.end(), is_digit)) {
    const int v = std::stoi(std::string(bare));
    if (v >= 1 && v <= m) return v;
  }
  return std::nullopt;
}

double rescale_score(std::optional<int> score, int m) {
  if (!score) return 0.5;
  return static_cast<double>(*score - 1) / static_cast<double>(m - 1);
}

// ---------------------------------------------------------------------------
// Judge

Judge::Judge(JudgeConfig config, std::shared_ptr<ChatTransport> transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      in_flight_(0) {
  config_.validate();
  if (!transport_) throw Error(ErrorCode::kConfig, "judge needs a transport");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  in_flight_.release(static_cast<std::ptrdiff_t>(config_.max_in_flight));
}

ChatResponse Judge::exchange(ChatRequest request) const {
  const std::string base_id = request.correlation_id;
  for (int attempt = 0;; ++attempt) {
    request.correlation_id = base_id + "#" + std::to_string(attempt);
    const bool last = attempt >= config_.max_retries;
    const auto delay = config_.backoff * (1 << std::min(attempt, 16));
    ChatResponse res;
    try {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      res = transport_->send(request);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kTransport || last) throw;
      spdlog::warn("judge {}: {}; retrying in {} ms", request.correlation_id, err.what(),
                   delay.count());
      sleeper_(delay);
      continue;
    }
    if (res.correlation_id != request.correlation_id) {
      throw Error(ErrorCode::kTransport, "response correlation id '" + res.correlation_id +
                                             "' does not match request '" +
                                             request.correlation_id + "'");
    }
    if (res.status >= 200 && res.status < 300) return res;
    const bool retryable = res.status == 429 || res.status >= 500;
    if (!retryable || last) {
      throw Error(ErrorCode::kStatus, "judge request " + request.correlation_id + " got HTTP " +
                                          std::to_string(res.status) + ": " +
                                          res.content.substr(0, 300));
    }
    const auto wait = res.retry_after ? std::max(*res.retry_after, delay) : delay;
    spdlog::warn("judge {}: HTTP {}; retrying in {} ms", request.correlation_id, res.status,
                 wait.count());
    sleeper_(wait);
  }
}

JudgeVerdict Judge::judge(std::span<const std::string> words, std::size_t index,
                          std::string_view correlation_id) const {
  ChatRequest request;
  request.correlation_id = std::string(correlation_id);
  request.model = config_.model;
  request.temperature = config_.temperature;
  request.messages = build_prompt(config_, words, index);

  JudgeVerdict verdict;
  ChatResponse first = exchange(request);
  verdict.raw_reply = first.content;
  verdict.score = parse_score(first.content, config_.m);
  verdict.rationale = first.content;
  if (verdict.score) return verdict;

  request.correlation_id = std::string(correlation_id) + "/reask";
  request.messages.push_back({"assistant", first.content});
  request.messages.push_back({"user", "Reply with only the integer score"});
  ChatResponse second = exchange(request);
  verdict.raw_reply += "\n" + second.content;
  verdict.score = parse_score(second.content, config_.m);
  if (!verdict.score) {
    spdlog::info("judge {}: no score in reply, abstaining", correlation_id);
  }
  return verdict;
}

std::string Judge::fingerprint() const {
  std::string exemplar_bytes;
  for (const auto& e : config_.exemplars) {
    exemplar_bytes += e.context + '\x1f' + e.target + '\x1f' + std::string(to_string(e.label)) +
                      '\x1f' + e.note + '\x1e';
  }
  char temp[32];
  std::snprintf(temp, sizeof temp, "%g", config_.temperature);
  return "llm/m=" + std::to_string(config_.m) + "/prompt=" + std::string(kJudgePromptVersion) +
         "/window=" + std::to_string(config_.window) + "/model=" + config_.model +
         "/temperature=" + temp + "/exemplars=" + sha256_hex(exemplar_bytes).substr(0, 12);
}

namespace {

class LlmDetector : public Detector {
 public:
  explicit LlmDetector(std::shared_ptr<const Judge> judge)
      : judge_(std::move(judge)), fingerprint_(judge_->fingerprint()) {}

  ErrorScore score(const Document& doc, std::size_t word_index) const override {
    const JudgeVerdict v =
        judge_->judge(doc.words, word_index, doc.id + ":" + std::to_string(word_index));
    ErrorScore s;
    s.doc_id = doc.id;
    s.word_index = word_index;
    s.surface = doc.words[word_index];
    s.score = rescale_score(v.score, judge_->config().m);
    s.detector = fingerprint_;
    s.abstained = v.abstained();
    return s;
  }

  std::string fingerprint() const override { return fingerprint_; }

 private:
  std::shared_ptr<const Judge> judge_;
  std::string fingerprint_;
};

}  // namespace

std::unique_ptr<Detector> make_llm_detector(std::shared_ptr<const Judge> judge) {
  if (!judge) throw Error(ErrorCode::kConfig, "llm detector needs a judge");
  return std::make_unique<LlmDetector>(std::move(judge));
}

}  // namespace lectio

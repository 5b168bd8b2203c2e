#include "lectio/review.hpp"

#include <fcntl.h>
#include <httplib.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lectio/error.hpp"
#include "lectio/hash.hpp"

namespace lectio {

using nlohmann::ordered_json;

namespace {

void append_durably(const std::filesystem::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::kIo, "cannot open journal " + path.string() + ": " +
                                    std::strerror(errno));
  }
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int saved = errno;
      ::close(fd);
      throw Error(ErrorCode::kIo, "journal write failed: " + std::string(std::strerror(saved)));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const int saved = errno;
    ::close(fd);
    throw Error(ErrorCode::kIo, "journal fsync failed: " + std::string(std::strerror(saved)));
  }
  ::close(fd);
}

std::string join(const std::vector<std::string>& words, std::size_t lo, std::size_t hi) {
  std::string out;
  for (std::size_t i = lo; i < hi; ++i) {
    if (i > lo) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

std::filesystem::path ReviewStore::journal_path(const std::filesystem::path& dataset) {
  std::filesystem::path p = dataset;
  p += ".journal";
  return p;
}

ReviewStore::ReviewStore(std::vector<ErrorScore> ranked, std::vector<Document> docs,
                         std::filesystem::path dataset, NormalizationPolicy policy)
    : dataset_(std::move(dataset)), policy_(policy) {
  for (auto& d : docs) {
    std::string id = d.id;
    docs_.emplace(std::move(id), std::move(d));
  }
  for (auto& s : ranked) {
    Key key{s.doc_id, s.word_index};
    if (rank_of_.count(key)) continue;
    rank_of_[key] = ranked_.size();
    ranked_.push_back(std::move(s));
  }

  if (std::filesystem::exists(dataset_)) {
    for (auto& ex : load_dataset(dataset_, policy_)) apply(std::move(ex), 1);
  }

  const auto journal = journal_path(dataset_);
  if (!std::filesystem::exists(journal)) return;
  const std::string bytes = read_file(journal);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    ++line_no;
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) {
      // Every committed entry ends in a newline; anything after the last one
      // is an interrupted write.
      spdlog::warn("{}: dropping torn entry at line {}", journal.string(), line_no);
      break;
    }
    const std::string_view line(bytes.data() + pos, nl - pos);
    pos = nl + 1;
    const auto tab = line.find('\t');
    const std::string where = journal.string() + ":" + std::to_string(line_no);
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::kParse, where + ": malformed journal entry");
    }
    std::size_t revision = 0;
    try {
      revision = std::stoul(std::string(line.substr(0, tab)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, where + ": bad revision");
    }
    apply(from_json_line(line.substr(tab + 1), where), revision);
    ++journal_entries_;
  }
}

void ReviewStore::apply(LabeledExample example, std::size_t revision) {
  Key key{example.doc_id, example.word_index};
  auto it = row_of_.find(key);
  if (it == row_of_.end()) {
    row_of_[key] = rows_.size();
    rows_.push_back(std::move(example));
  } else {
    rows_[it->second] = std::move(example);
  }
  revisions_[key] = revision;
}

std::string ReviewStore::revision_of(const Key& key) const {
  auto it = revisions_.find(key);
  return "r" + std::to_string(it == revisions_.end() ? 0 : it->second);
}

ReviewStore::Page ReviewStore::queue(std::size_t offset, std::size_t limit,
                                     const std::optional<std::string>& doc_filter) const {
  std::lock_guard lock(mu_);
  Page page;
  for (std::size_t i = 0; i < ranked_.size(); ++i) {
    const ErrorScore& s = ranked_[i];
    if (doc_filter && s.doc_id != *doc_filter) continue;
    if (row_of_.count({s.doc_id, s.word_index})) continue;
    if (page.total >= offset && page.items.size() < limit) page.items.push_back({i, &s});
    ++page.total;
  }
  return page;
}

ReviewStore::ItemView ReviewStore::item(const std::string& doc_id, std::size_t word_index,
                                        std::size_t window) const {
  std::lock_guard lock(mu_);
  auto doc = docs_.find(doc_id);
  if (doc == docs_.end()) throw Error(ErrorCode::kQuery, "unknown document '" + doc_id + "'");
  const auto& words = doc->second.words;
  if (word_index >= words.size()) {
    throw Error(ErrorCode::kQuery, "document '" + doc_id + "' has no word " +
                                       std::to_string(word_index));
  }
  ItemView v;
  v.doc_id = doc_id;
  v.word_index = word_index;
  v.surface = words[word_index];
  const Key key{doc_id, word_index};
  if (auto r = rank_of_.find(key); r != rank_of_.end()) {
    v.rank = r->second;
    v.score = ranked_[r->second].score;
    v.best_alternative = ranked_[r->second].best_alternative;
  }
  const std::size_t lo = word_index > window ? word_index - window : 0;
  const std::size_t hi = std::min(words.size(), word_index + window + 1);
  v.left_context = join(words, lo, word_index);
  v.right_context = join(words, word_index + 1, hi);
  v.revision = revision_of(key);
  if (auto row = row_of_.find(key); row != row_of_.end()) v.label = rows_[row->second];
  return v;
}

std::string ReviewStore::submit(const LabelSubmission& sub) {
  std::lock_guard lock(mu_);
  auto doc = docs_.find(sub.doc_id);
  if (doc == docs_.end()) throw Error(ErrorCode::kQuery, "unknown document '" + sub.doc_id + "'");
  const Document& d = doc->second;
  if (sub.word_index >= d.spans.size()) {
    throw Error(ErrorCode::kQuery, "document '" + sub.doc_id + "' has no word " +
                                       std::to_string(sub.word_index));
  }
  if (d.spans[sub.word_index].punctuation) {
    throw Error(ErrorCode::kQuery, "word " + std::to_string(sub.word_index) + " of '" +
                                       sub.doc_id + "' is punctuation");
  }
  const Key key{sub.doc_id, sub.word_index};
  const std::string current = revision_of(key);
  if (sub.revision.value_or("r0") != current) {
    throw Error(ErrorCode::kConflict, "stale revision for (" + sub.doc_id + ", " +
                                          std::to_string(sub.word_index) + "): client has " +
                                          sub.revision.value_or("none") + ", current is " +
                                          current);
  }

  LabeledExample ex;
  ex.doc_id = sub.doc_id;
  ex.word_index = sub.word_index;
  ex.surface = d.words[sub.word_index];
  ex.label = sub.label;
  ex.category = sub.category;
  ex.expert_notes = sub.notes;
  ex.suggested_alternative = sub.suggested_alternative;
  ex.context_text = d.text.normalized();
  ex.provenance = Provenance::kExpertLabeled;
  validate(ex);

  auto it = revisions_.find(key);
  const std::size_t next = (it == revisions_.end() ? 0 : it->second) + 1;
  append_durably(journal_path(dataset_), std::to_string(next) + "\t" + to_json_line(ex) + "\n");
  ++journal_entries_;
  apply(std::move(ex), next);
  return "r" + std::to_string(next);
}

std::vector<LabeledExample> ReviewStore::labels() const {
  std::lock_guard lock(mu_);
  return rows_;
}

std::string ReviewStore::export_jsonl() const {
  std::lock_guard lock(mu_);
  return serialize_dataset(rows_);
}

void ReviewStore::compact() {
  std::lock_guard lock(mu_);
  write_file_atomic(dataset_, serialize_dataset(rows_));
  std::error_code ec;
  std::filesystem::remove(journal_path(dataset_), ec);
  journal_entries_ = 0;
}

std::size_t ReviewStore::journal_entries() const {
  std::lock_guard lock(mu_);
  return journal_entries_;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

constexpr const char* kPlaceholderPage =
    "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>lectio review</title></head>\n"
    "<body><h1>lectio review</h1><p>No UI bundle is configured. The JSON API is served under "
    "<code>/api</code>: <code>GET /api/queue</code>, <code>GET /api/item/{doc}/{index}</code>, "
    "<code>POST /api/label</code>, <code>GET /api/export</code>.</p></body></html>\n";

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& err) {
  int status = 500;
  switch (err.code()) {
    case ErrorCode::kConflict: status = 409; break;
    case ErrorCode::kQuery: status = 404; break;
    case ErrorCode::kSchema:
    case ErrorCode::kParse:
    case ErrorCode::kConfig: status = 400; break;
    default: break;
  }
  send_json(res, status, {{"error", std::string(to_string(err.code()))}, {"message", err.what()}});
}

std::size_t query_size(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  try {
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw std::invalid_argument("not a number");
    }
    return std::stoul(v);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParse, std::string("query parameter '") + name +
                                       "' is not a non-negative integer");
  }
}

ordered_json nullable(const std::optional<std::string>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

LabelSubmission parse_submission(const std::string& body) {
  ordered_json j;
  try {
    j = ordered_json::parse(body);
  } catch (const std::exception& ex) {
    throw Error(ErrorCode::kParse, std::string("label body is not JSON: ") + ex.what());
  }
  auto field = [&](const char* a, const char* b) -> const ordered_json* {
    if (j.contains(a)) return &j[a];
    if (j.contains(b)) return &j[b];
    return nullptr;
  };
  LabelSubmission s;
  try {
    const auto* doc = field("doc", "doc_id");
    const auto* index = field("index", "word_index");
    if (!doc || !index || !j.contains("label")) {
      throw Error(ErrorCode::kSchema, "label body needs doc, index and label");
    }
    s.doc_id = doc->get<std::string>();
    s.word_index = index->get<std::size_t>();
    s.label = parse_label(j["label"].get<std::string>());
    if (j.contains("category") && !j["category"].is_null()) {
      s.category = parse_category(j["category"].get<std::string>());
    }
    if (const auto* notes = field("notes", "expert_notes"); notes && !notes->is_null()) {
      s.notes = notes->get<std::string>();
    }
    if (j.contains("suggested_alternative") && !j["suggested_alternative"].is_null()) {
      s.suggested_alternative = j["suggested_alternative"].get<std::string>();
    }
    if (j.contains("revision") && !j["revision"].is_null()) {
      s.revision = j["revision"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kSchema, std::string("label body: ") + ex.what());
  }
  return s;
}

}  // namespace

struct ReviewServer::Impl {
  std::shared_ptr<ReviewStore> store;
  ReviewServerOptions options;
  httplib::Server server;
};

ReviewServer::ReviewServer(std::shared_ptr<ReviewStore> store, ReviewServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->store = std::move(store);
  impl_->options = std::move(options);
  auto& srv = impl_->server;
  ReviewStore* st = impl_->store.get();

  // httplib's default adds SO_REUSEPORT, which would let a second server
  // silently share the port.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });

  if (impl_->options.shared_secret) {
    const std::string secret = *impl_->options.shared_secret;
    srv.set_pre_routing_handler([secret](const httplib::Request& req, httplib::Response& res) {
      if (req.path.rfind("/api/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("X-Review-Secret") == secret) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      send_json(res, 401, {{"error", "unauthorized"}, {"message", "missing or wrong secret"}});
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                               std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& err) {
      send_error(res, err);
    } catch (const std::exception& ex) {
      send_json(res, 500, {{"error", "internal"}, {"message", ex.what()}});
    }
  });

  srv.Get("/api/queue", [st](const httplib::Request& req, httplib::Response& res) {
    const std::size_t offset = query_size(req, "offset", 0);
    const std::size_t limit = std::min<std::size_t>(query_size(req, "limit", 20), 1000);
    std::optional<std::string> doc;
    if (req.has_param("doc")) doc = req.get_param_value("doc");
    const auto page = st->queue(offset, limit, doc);
    ordered_json items = ordered_json::array();
    for (const auto& q : page.items) {
      items.push_back({{"rank", q.rank},
                       {"doc_id", q.score->doc_id},
                       {"word_index", q.score->word_index},
                       {"surface", q.score->surface},
                       {"score", q.score->score},
                       {"best_alternative", nullable(q.score->best_alternative)}});
    }
    send_json(res, 200,
              {{"total", page.total}, {"offset", offset}, {"limit", limit}, {"items", items}});
  });

  srv.Get(R"(/api/item/([^/]+)/(\d+))", [st](const httplib::Request& req, httplib::Response& res) {
    const auto v = st->item(req.matches[1], std::stoul(req.matches[2]));
    ordered_json j;
    j["doc_id"] = v.doc_id;
    j["word_index"] = v.word_index;
    j["surface"] = v.surface;
    j["score"] = v.score ? ordered_json(*v.score) : ordered_json(nullptr);
    j["rank"] = v.rank ? ordered_json(*v.rank) : ordered_json(nullptr);
    j["best_alternative"] = nullable(v.best_alternative);
    j["context"] = {{"left", v.left_context}, {"target", v.surface}, {"right", v.right_context}};
    j["revision"] = v.revision;
    j["label"] = v.label ? ordered_json::parse(to_json_line(*v.label)) : ordered_json(nullptr);
    send_json(res, 200, j);
  });

  srv.Post("/api/label", [st](const httplib::Request& req, httplib::Response& res) {
    const LabelSubmission sub = parse_submission(req.body);
    const std::string revision = st->submit(sub);
    send_json(res, 200, {{"doc_id", sub.doc_id},
                         {"word_index", sub.word_index},
                         {"revision", revision}});
  });

  srv.Get("/api/export", [st](const httplib::Request&, httplib::Response& res) {
    res.set_content(st->export_jsonl(), "application/x-ndjson");
  });

  const auto& dir = impl_->options.static_dir;
  if (dir && std::filesystem::is_directory(*dir)) {
    srv.set_mount_point("/", dir->string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
    });
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind() {
  auto& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
  } else if (!impl_->server.bind_to_port(o.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error(ErrorCode::kIo, "cannot bind review server to " + o.host + ":" +
                                    std::to_string(o.port));
  }
  return port;
}

void ReviewServer::run() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace lectio

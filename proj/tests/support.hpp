#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "falconer/backends.hpp"
#include "falconer/corpus.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& name) { return fs::path(FALCONER_FIXTURE_DIR) / name; }
inline fs::path golden(const std::string& name) { return fs::path(FALCONER_GOLDEN_DIR) / name; }

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "falconer-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline nlohmann::json fixture_rules() { return nlohmann::json::parse(slurp(fixture("mock_rules.json"))); }

inline std::unique_ptr<falconer::MockBackend> fixture_mock(falconer::BackendDescriptor d = {}) {
  if (d.id.empty()) d.id = "mock:fixture";
  return std::make_unique<falconer::MockBackend>(fixture_rules(), d);
}

inline falconer::Corpus ted_corpus() { return falconer::load_corpus(fixture("ted_talks.jsonl")); }

/// Backend whose label scores come from a text -> score table.
inline std::unique_ptr<falconer::MockBackend> score_table_backend(const nlohmann::json& scores, std::size_t max_batch = 64) {
  falconer::BackendDescriptor d;
  d.id = "mock:scores";
  d.max_batch = max_batch;
  nlohmann::json rule = {{"instruction_contains", ""}, {"fixed_scores", scores}};
  nlohmann::json rules = {{"classify", nlohmann::json::array({rule})}};
  return std::make_unique<falconer::MockBackend>(rules, d);
}

/// Chat client replaying canned replies in order, cycling at the end.
class ScriptedChat : public falconer::ChatClient {
 public:
  explicit ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const std::vector<falconer::ChatMessage>& messages) override {
    std::lock_guard lock(mu_);
    seen.push_back(messages);
    return replies_.at(next_++ % replies_.size());
  }
  std::vector<std::vector<falconer::ChatMessage>> seen;

 private:
  std::mutex mu_;
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

}  // namespace testsupport

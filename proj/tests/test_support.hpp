#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

namespace autograde::support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(AUTOGRADE_FIXTURE_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("autograde-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random printable text with spaces, punctuation and some UTF-8.
inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const char* pieces[] = {"a", "b", "z", "Q", "7", " ", " ", ".", ",", "!", "-", "_", "\n",
                                 "ä", "ß", "é", "the", "cat", "Good", "close", "very", "42", "(", ")"};
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(pieces) - 1);
  std::string out;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) out += pieces[pick(rng)];
  return out;
}

}  // namespace autograde::support

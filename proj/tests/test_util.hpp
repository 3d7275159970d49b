#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spanex/tokenizer.hpp"

namespace spanex::test {

// Specials followed by the given words, in order.
inline Vocabulary toy_vocab(std::vector<std::string> words) {
  std::vector<std::string> tokens = {Vocabulary::kPad, Vocabulary::kUnk,
                                     Vocabulary::kCls, Vocabulary::kSep};
  for (auto& w : words) tokens.push_back(std::move(w));
  return Vocabulary::from_tokens(std::move(tokens));
}

// Fresh directory under the system temp root, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            ("spanex_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace spanex::test

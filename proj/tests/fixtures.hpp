#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "matchbench/benchmark.hpp"

namespace fixtures {

inline std::filesystem::path source_root() { return MATCHBENCH_SOURCE_ROOT; }
inline std::filesystem::path mini_path() { return source_root() / "bench" / "mini"; }
inline const matchbench::Benchmark& mini() {
  static const matchbench::Benchmark b = matchbench::load_benchmark(mini_path());
  return b;
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("matchbench-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline matchbench::Dataset small_dataset(std::string id, std::size_t s, std::size_t t) {
  matchbench::Dataset d;
  d.id = std::move(id);
  d.source.table_name = "src";
  d.target.table_name = "tgt";
  for (std::size_t i = 0; i < s; ++i) d.source.attributes.push_back({"s" + std::to_string(i), "source " + std::to_string(i)});
  for (std::size_t i = 0; i < t; ++i) d.target.attributes.push_back({"t" + std::to_string(i), "target " + std::to_string(i)});
  return d;
}

}  // namespace fixtures

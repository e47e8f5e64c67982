#pragma once

#include "corrsounder/error.hpp"
#include "corrsounder/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testing {

inline const nlohmann::json& oracles() {
  static const nlohmann::json data = [] {
    std::ifstream in(std::string(CORRSOUNDER_ORACLE_DIR) + "/oracles.json");
    return nlohmann::json::parse(in);
  }();
  return data;
}

inline corrsounder::CVec to_cvec(const nlohmann::json& pairs) {
  corrsounder::CVec v(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = {pairs[i][0].get<double>(), pairs[i][1].get<double>()};
  }
  return v;
}

inline corrsounder::CVec random_cvec(std::mt19937_64& rng, long n) {
  std::normal_distribution<double> g;
  corrsounder::CVec v(n);
  for (long i = 0; i < n; ++i) v(i) = {g(rng), g(rng)};
  return v;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("corrsounder-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

}  // namespace testing

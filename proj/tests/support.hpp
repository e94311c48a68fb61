#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "esekit/domain.hpp"
#include "esekit/exec.hpp"
#include "esekit/util.hpp"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("esekit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline esekit::LanguageProfile sh_profile() { return esekit::builtin_profiles().at("sh"); }

inline esekit::CandidateProgram program(std::string id, std::string model, std::string source) {
  esekit::CandidateProgram c;
  c.sample_id = std::move(id);
  c.model_id = std::move(model);
  c.source = std::move(source);
  return c;
}

inline std::vector<esekit::TestCase> inputs(const std::vector<std::string>& ins) {
  std::vector<esekit::TestCase> out;
  for (std::size_t i = 0; i < ins.size(); ++i) {
    out.push_back({"g" + std::to_string(i + 1), ins[i], std::nullopt});
  }
  return out;
}

inline std::vector<esekit::TestCase> io(const std::vector<std::pair<std::string, std::string>>& p,
                                        const std::string& prefix = "t") {
  std::vector<esekit::TestCase> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.push_back({prefix + std::to_string(i + 1), p[i].first, p[i].second});
  }
  return out;
}

inline std::string data_path(const std::string& rel) {
  return std::string(ESEKIT_SOURCE_DIR) + "/" + rel;
}

}  // namespace testing

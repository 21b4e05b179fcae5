#pragma once

#include <filesystem>
#include <string>

namespace testutil {

// unique path under the system temp dir; removed by the caller if desired
inline std::filesystem::path temp_path(const std::string& stem) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path();
  return dir / (stem + "_" + std::to_string(++counter));
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& stem) : path(temp_path(stem)) {
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil

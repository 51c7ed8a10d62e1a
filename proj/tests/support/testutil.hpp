#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "notetopics/common.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("notetopics-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline std::filesystem::path write_temp(const TempDir& dir, const std::string& name,
                                        std::string_view content) {
    auto p = dir.file(name);
    notetopics::write_file(p, content);
    return p;
}

}  // namespace testutil

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "siagent/telemetry/types.hpp"

namespace siagent::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("siagent_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

/// Plain frame: both hands open at rest, gaze on `target` (or nothing).
inline telemetry::TelemetryFrame plain_frame(std::uint64_t seq, std::optional<std::string> target = std::nullopt) {
    telemetry::TelemetryFrame f;
    f.seq = seq;
    f.gaze.timestamp_ms = static_cast<std::int64_t>(seq * 33);
    f.gaze.fixating = target.has_value();
    f.gaze.target_name = std::move(target);
    f.head_position = Vec3(0.0, 1.6, 0.0);
    f.left.pose.hand = telemetry::Hand::Left;
    f.left.fingers.hand = telemetry::Hand::Left;
    f.left.pose.palm_position = Vec3(-0.2, 1.2, -0.3);
    f.right.pose.palm_position = Vec3(0.2, 1.2, -0.3);
    f.left.fingers.flexion.fill(0.1);
    f.left.fingers.curl.fill(0.1);
    f.right.fingers.flexion.fill(0.1);
    f.right.fingers.curl.fill(0.1);
    return f;
}

inline std::filesystem::path data_dir_for_tests() { return SIAGENT_TEST_DATA_DIR; }

}  // namespace siagent::testing

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "siagent/telemetry/types.hpp"

namespace siagent::telemetry {

struct WindowMarker {
    std::uint64_t start_seq = 0;
    std::uint64_t end_seq = 0;

    bool operator==(const WindowMarker&) const = default;
};

/// In-memory form of a recorded session file.
struct SessionLog {
    std::string scene_id;
    std::int64_t start_epoch_ms = 0;
    std::vector<TelemetryFrame> frames;
    std::vector<WindowMarker> windows;

    /// Rebuilds each marked window from the recorded frames.
    std::vector<DemonstrationWindow> demonstration_windows() const;

    bool operator==(const SessionLog&) const = default;
};

/// Append-only writer. Frames must arrive with strictly increasing seq;
/// violations throw OrderViolation carrying the stream index of the frame.
class SessionWriter {
public:
    SessionWriter(const std::filesystem::path& path, std::string_view scene_id, std::int64_t start_epoch_ms);

    void append(const TelemetryFrame& frame);
    void mark_window(std::uint64_t start_seq, std::uint64_t end_seq);
    void flush();
    std::size_t frames_written() const { return index_; }

private:
    void write_line(const std::string& line);

    std::filesystem::path path_;
    std::ofstream out_;
    std::optional<std::uint64_t> last_seq_;
    std::size_t index_ = 0;
};

std::string format_frame_line(const TelemetryFrame& frame);
TelemetryFrame parse_frame_line(std::string_view line, std::size_t lineno);

std::string format_session(const SessionLog& log);
SessionLog parse_session(std::string_view text);

/// Writes every frame and a marker per window. Windows are given as
/// (first seq, last seq) pairs. Throws OrderViolation / IoError.
SessionLog record_session(const std::vector<TelemetryFrame>& frames, const std::vector<WindowMarker>& windows,
                          const std::filesystem::path& sink, std::string_view scene_id,
                          std::int64_t start_epoch_ms);

/// Convenience: records each window back to back with its marker.
SessionLog record_windows(const std::vector<DemonstrationWindow>& windows, const std::filesystem::path& sink,
                          std::string_view scene_id, std::int64_t start_epoch_ms);

SessionLog load_session(const std::filesystem::path& path);

}  // namespace siagent::telemetry

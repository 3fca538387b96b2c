#include "siagent/telemetry/session_file.hpp"

#include <sstream>

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/core/text.hpp"

namespace siagent::telemetry {

namespace {

constexpr std::string_view kHeader = "SIAGENT-SESSION";
constexpr std::size_t kFrameFields = 42;

void append_hand(std::string& out, const HandSample& h) {
    const auto& p = h.pose.palm_position;
    const auto& q = h.pose.palm_rotation;
    for (double v : {p.x(), p.y(), p.z(), q.x(), q.y(), q.z(), q.w()}) {
        out += ' ';
        out += text::fixed6(v);
    }
    for (double v : h.fingers.flexion) {
        out += ' ';
        out += text::fixed6(v);
    }
    for (double v : h.fingers.curl) {
        out += ' ';
        out += text::fixed6(v);
    }
}

double num(const std::vector<std::string>& tok, std::size_t i, std::size_t lineno) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok[i], &used);
        if (used != tok[i].size()) throw std::invalid_argument(tok[i]);
        return v;
    } catch (const std::exception&) {
        throw ParseError(lineno, fmt::format("field {} is not a number: '{}'", i + 1, tok[i]));
    }
}

std::uint64_t unsigned_int(const std::string& s, std::size_t lineno, const char* what) {
    try {
        std::size_t used = 0;
        if (!s.empty() && s.front() == '-') throw std::invalid_argument(s);
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(lineno, fmt::format("bad {} '{}'", what, s));
    }
}

HandSample parse_hand(const std::vector<std::string>& tok, std::size_t at, Hand hand, std::size_t lineno) {
    HandSample h;
    h.pose.hand = hand;
    h.fingers.hand = hand;
    h.pose.palm_position = Vec3(num(tok, at, lineno), num(tok, at + 1, lineno), num(tok, at + 2, lineno));
    h.pose.palm_rotation =
        Quat(num(tok, at + 6, lineno), num(tok, at + 3, lineno), num(tok, at + 4, lineno), num(tok, at + 5, lineno));
    for (std::size_t i = 0; i < 5; ++i) {
        h.fingers.flexion[i] = num(tok, at + 7 + i, lineno);
        h.fingers.curl[i] = num(tok, at + 12 + i, lineno);
    }
    return h;
}

}  // namespace

std::vector<DemonstrationWindow> SessionLog::demonstration_windows() const {
    std::vector<DemonstrationWindow> out;
    for (const auto& w : windows) {
        std::vector<TelemetryFrame> frames;
        for (const auto& f : this->frames) {
            if (f.seq >= w.start_seq && f.seq <= w.end_seq) frames.push_back(f);
        }
        out.emplace_back(std::move(frames));
    }
    return out;
}

std::string format_frame_line(const TelemetryFrame& f) {
    std::string out = fmt::format("F {} {} {} {}", f.seq, f.gaze.timestamp_ms, f.gaze.fixating ? 1 : 0,
                                  f.gaze.target_name ? *f.gaze.target_name : std::string("-"));
    for (double v : {f.head_position.x(), f.head_position.y(), f.head_position.z()}) {
        out += ' ';
        out += text::fixed6(v);
    }
    append_hand(out, f.left);
    append_hand(out, f.right);
    return out;
}

TelemetryFrame parse_frame_line(std::string_view line, std::size_t lineno) {
    const auto tok = text::split_ws(line);
    if (tok.size() != kFrameFields || tok[0] != "F") {
        throw ParseError(lineno, fmt::format("frame record needs {} fields, got {}", kFrameFields, tok.size()));
    }
    TelemetryFrame f;
    f.seq = unsigned_int(tok[1], lineno, "seq");
    f.gaze.timestamp_ms = static_cast<std::int64_t>(unsigned_int(tok[2], lineno, "timestamp"));
    if (tok[3] != "0" && tok[3] != "1") throw ParseError(lineno, "fixation flag must be 0 or 1");
    f.gaze.fixating = tok[3] == "1";
    if (tok[4] != "-") f.gaze.target_name = tok[4];
    f.head_position = Vec3(num(tok, 5, lineno), num(tok, 6, lineno), num(tok, 7, lineno));
    f.left = parse_hand(tok, 8, Hand::Left, lineno);
    f.right = parse_hand(tok, 25, Hand::Right, lineno);
    try {
        validate(f);
    } catch (const InvalidRecord& e) {
        throw ParseError(lineno, e.what());
    }
    return f;
}

std::string format_session(const SessionLog& log) {
    std::string out = fmt::format("{} v1 {} {}\n", kHeader, log.scene_id, log.start_epoch_ms);
    // Markers follow the last frame of their window so the file can be
    // written incrementally.
    std::size_t next_marker = 0;
    for (const auto& f : log.frames) {
        out += format_frame_line(f);
        out += '\n';
        while (next_marker < log.windows.size() && log.windows[next_marker].end_seq <= f.seq) {
            const auto& w = log.windows[next_marker++];
            out += fmt::format("W {} {}\n", w.start_seq, w.end_seq);
        }
    }
    for (; next_marker < log.windows.size(); ++next_marker) {
        const auto& w = log.windows[next_marker];
        out += fmt::format("W {} {}\n", w.start_seq, w.end_seq);
    }
    return out;
}

SessionLog parse_session(std::string_view text) {
    SessionLog log;
    std::size_t lineno = 0;
    bool have_header = false;
    for (const auto& raw : text::split(text, '\n')) {
        ++lineno;
        const auto line = text::trim(raw);
        if (!have_header) {
            const auto tok = text::split_ws(line);
            if (tok.size() != 4 || tok[0] != kHeader || tok[1] != "v1") {
                throw ParseError(lineno, "missing 'SIAGENT-SESSION v1 <scene-id> <start-epoch-ms>' header");
            }
            log.scene_id = tok[2];
            try {
                log.start_epoch_ms = std::stoll(tok[3]);
            } catch (const std::exception&) {
                throw ParseError(lineno, "bad start epoch");
            }
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        if (line.front() == 'F') {
            auto f = parse_frame_line(line, lineno);
            if (!log.frames.empty() && f.seq <= log.frames.back().seq) {
                throw ParseError(lineno, fmt::format("seq {} does not increase", f.seq));
            }
            log.frames.push_back(std::move(f));
        } else if (line.front() == 'W') {
            const auto tok = text::split_ws(line);
            if (tok.size() != 3) throw ParseError(lineno, "window marker needs start and end seq");
            WindowMarker w{unsigned_int(tok[1], lineno, "start seq"), unsigned_int(tok[2], lineno, "end seq")};
            if (w.end_seq < w.start_seq) throw ParseError(lineno, "window end precedes start");
            log.windows.push_back(w);
        } else {
            throw ParseError(lineno, "unknown record type");
        }
    }
    if (!have_header) throw ParseError(1, "empty session file");
    return log;
}

SessionWriter::SessionWriter(const std::filesystem::path& path, std::string_view scene_id,
                             std::int64_t start_epoch_ms)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open session file " + path.string());
    write_line(fmt::format("{} v1 {} {}", kHeader, scene_id, start_epoch_ms));
}

void SessionWriter::append(const TelemetryFrame& frame) {
    if (last_seq_ && frame.seq <= *last_seq_) {
        throw OrderViolation(index_, fmt::format("seq {} at index {} after seq {}", frame.seq, index_, *last_seq_));
    }
    validate(frame);
    write_line(format_frame_line(frame));
    last_seq_ = frame.seq;
    ++index_;
}

void SessionWriter::mark_window(std::uint64_t start_seq, std::uint64_t end_seq) {
    write_line(fmt::format("W {} {}", start_seq, end_seq));
}

void SessionWriter::flush() {
    out_.flush();
    if (!out_) throw IoError("flush failed for " + path_.string());
}

void SessionWriter::write_line(const std::string& line) {
    out_ << line << '\n';
    if (!out_) throw IoError("write failed for " + path_.string());
}

SessionLog record_session(const std::vector<TelemetryFrame>& frames, const std::vector<WindowMarker>& windows,
                          const std::filesystem::path& sink, std::string_view scene_id,
                          std::int64_t start_epoch_ms) {
    SessionWriter writer(sink, scene_id, start_epoch_ms);
    std::size_t next_marker = 0;
    for (const auto& f : frames) {
        writer.append(f);
        while (next_marker < windows.size() && windows[next_marker].end_seq <= f.seq) {
            writer.mark_window(windows[next_marker].start_seq, windows[next_marker].end_seq);
            ++next_marker;
        }
    }
    for (; next_marker < windows.size(); ++next_marker) {
        writer.mark_window(windows[next_marker].start_seq, windows[next_marker].end_seq);
    }
    writer.flush();
    return load_session(sink);
}

SessionLog record_windows(const std::vector<DemonstrationWindow>& windows, const std::filesystem::path& sink,
                          std::string_view scene_id, std::int64_t start_epoch_ms) {
    std::vector<TelemetryFrame> frames;
    std::vector<WindowMarker> markers;
    for (const auto& w : windows) {
        if (w.empty()) continue;
        frames.insert(frames.end(), w.frames().begin(), w.frames().end());
        markers.push_back({w.frames().front().seq, w.frames().back().seq});
    }
    return record_session(frames, markers, sink, scene_id, start_epoch_ms);
}

SessionLog load_session(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open session file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_session(ss.str());
}

}  // namespace siagent::telemetry

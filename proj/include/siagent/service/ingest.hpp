#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "siagent/scene/scene.hpp"
#include "siagent/telemetry/types.hpp"

namespace siagent::service {

// Little-endian datagrams. A frame packet is
//   "SIAG" ver:u8 seq:u32 t_ms:u32 flags:u8 gaze_name:u16 head:3xf32
//   then left and right hand: pos:3xf32 quat(x,y,z,w):4xf32 flex:5xu8 curl:5xu8
// flags bit 0 = fixating; gaze_name indexes the announced name table,
// 0xFFFF for none. An announce packet is
//   "SIAN" ver:u8 count:u16 scene:str8 names:count x str8
// where str8 is a u8 length and that many bytes.
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameBytes = 104;
inline constexpr std::uint16_t kNoName = 0xFFFF;

struct NameTable {
    std::string scene_id;
    std::vector<std::string> names;

    std::optional<std::uint16_t> index_of(std::string_view name) const;
    bool operator==(const NameTable&) const = default;
};

NameTable name_table_for(const scene::SceneSnapshot& scene);

/// Throws UnknownTarget when the gaze target is not in the table.
std::vector<std::uint8_t> encode_frame(const telemetry::TelemetryFrame& frame, const NameTable& names);
/// Throws InvalidRecord for a packet of the wrong size, magic or version, or
/// an out-of-range name index.
telemetry::TelemetryFrame decode_frame(std::span<const std::uint8_t> packet, const NameTable& names);

std::vector<std::uint8_t> encode_announce(const NameTable& names);
NameTable decode_announce(std::span<const std::uint8_t> packet);

/// Stateful packet decoder: announces replace the name table, malformed
/// packets are counted and dropped.
class DatagramDecoder {
public:
    explicit DatagramDecoder(NameTable names = {}) : names_(std::move(names)) {}

    std::optional<telemetry::TelemetryFrame> feed(std::span<const std::uint8_t> packet);

    const NameTable& names() const { return names_; }
    std::size_t decoded() const { return decoded_; }
    std::size_t dropped() const { return dropped_; }
    std::size_t announces() const { return announces_; }

private:
    NameTable names_;
    std::size_t decoded_ = 0;
    std::size_t dropped_ = 0;
    std::size_t announces_ = 0;
};

/// Releases frames in seq order. A gap is waited on for at most `hold_ms`
/// after the first frame behind it arrived; then the missing frames are
/// given up. Frames older than the last released one are dropped. The first
/// frame is also held, since an earlier one may still be in flight.
class ReorderBuffer {
public:
    explicit ReorderBuffer(double hold_ms = 100.0) : hold_ms_(hold_ms) {}

    std::vector<telemetry::TelemetryFrame> push(telemetry::TelemetryFrame frame, double now_ms);
    std::vector<telemetry::TelemetryFrame> poll(double now_ms);
    std::vector<telemetry::TelemetryFrame> flush();

    std::size_t buffered() const { return pending_.size(); }
    std::size_t late_drops() const { return late_; }
    std::size_t gaps_skipped() const { return skipped_; }

private:
    void release(std::vector<telemetry::TelemetryFrame>& out, double now_ms);

    struct Held {
        telemetry::TelemetryFrame frame;
        double arrived_ms;
    };
    double hold_ms_;
    std::optional<std::uint64_t> next_;
    std::map<std::uint64_t, Held> pending_;
    std::size_t late_ = 0;
    std::size_t skipped_ = 0;
};

/// Fixed-capacity FIFO that discards the oldest item when full.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

    void push(T item) {
        {
            std::lock_guard lk(mutex_);
            if (items_.size() >= capacity_) {
                items_.pop_front();
                ++overflow_;
            }
            items_.push_back(std::move(item));
        }
        cv_.notify_one();
    }

    std::optional<T> pop(std::chrono::milliseconds timeout) {
        std::unique_lock lk(mutex_);
        if (!cv_.wait_for(lk, timeout, [&] { return !items_.empty() || closed_; })) return std::nullopt;
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        return item;
    }

    void close() {
        {
            std::lock_guard lk(mutex_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lk(mutex_);
        return items_.size();
    }
    std::size_t overflow() const {
        std::lock_guard lk(mutex_);
        return overflow_;
    }

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<T> items_;
    std::size_t overflow_ = 0;
    bool closed_ = false;
};

struct IngestStats {
    std::size_t received = 0;
    std::size_t decoded = 0;
    std::size_t malformed = 0;
    std::size_t overflow = 0;
    std::size_t late = 0;
    std::size_t announces = 0;
};

/// Receives telemetry datagrams on a UDP socket. One thread reads the
/// socket into a bounded queue, another decodes, reorders and hands frames
/// to the sink.
class UdpIngestor {
public:
    using Sink = std::function<void(const telemetry::TelemetryFrame&)>;

    /// Throws IoError when the socket cannot be bound. Port 0 picks a free
    /// port.
    UdpIngestor(const std::string& host, int port, NameTable names, std::size_t queue_capacity = 1024);
    ~UdpIngestor();
    UdpIngestor(const UdpIngestor&) = delete;
    UdpIngestor& operator=(const UdpIngestor&) = delete;

    int port() const { return port_; }
    void start(Sink sink);
    void stop();
    IngestStats stats() const;

private:
    void receive_loop();
    void dispatch_loop();

    int fd_ = -1;
    int port_ = 0;
    Sink sink_;
    BoundedQueue<std::vector<std::uint8_t>> queue_;
    mutable std::mutex stats_mutex_;
    DatagramDecoder decoder_;
    ReorderBuffer reorder_;
    std::atomic<std::size_t> received_{0};
    std::atomic<bool> running_{false};
    std::thread receiver_;
    std::thread dispatcher_;
};

}  // namespace siagent::service

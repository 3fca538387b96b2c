#include "siagent/service/ingest.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>

#include <fmt/format.h>

#include "siagent/core/error.hpp"

namespace siagent::service {

using telemetry::TelemetryFrame;

namespace {

constexpr char kFrameMagic[4] = {'S', 'I', 'A', 'G'};
constexpr char kAnnounceMagic[4] = {'S', 'I', 'A', 'N'};

class Writer {
public:
    void bytes(const char* p, std::size_t n) { out.insert(out.end(), p, p + n); }
    void u8(std::uint8_t v) { out.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void str8(const std::string& s) {
        if (s.size() > 255) throw InvalidRecord("name longer than 255 bytes: " + s);
        u8(static_cast<std::uint8_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> d) : data(d) {}
    void need(std::size_t n) const {
        if (pos + n > data.size()) throw InvalidRecord("truncated packet");
    }
    std::uint8_t u8() {
        need(1);
        return data[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f32() { return std::bit_cast<float>(u32()); }
    std::string str8() {
        std::size_t n = u8();
        need(n);
        std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
        pos += n;
        return s;
    }
    bool magic(const char (&m)[4]) {
        need(4);
        bool ok = std::memcmp(data.data() + pos, m, 4) == 0;
        pos += 4;
        return ok;
    }
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
};

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void write_hand(Writer& w, const telemetry::HandSample& h) {
    const auto& p = h.pose.palm_position;
    const auto& q = h.pose.palm_rotation;
    for (double v : {p.x(), p.y(), p.z(), q.x(), q.y(), q.z(), q.w()}) w.f32(v);
    for (double v : h.fingers.flexion) w.u8(quantize(v));
    for (double v : h.fingers.curl) w.u8(quantize(v));
}

telemetry::HandSample read_hand(Reader& r, telemetry::Hand which) {
    telemetry::HandSample h;
    h.pose.hand = which;
    h.fingers.hand = which;
    double px = r.f32(), py = r.f32(), pz = r.f32();
    h.pose.palm_position = Vec3(px, py, pz);
    double qx = r.f32(), qy = r.f32(), qz = r.f32(), qw = r.f32();
    Quat q(qw, qx, qy, qz);
    if (!std::isfinite(q.norm()) || q.norm() < 1e-6) throw InvalidRecord("degenerate palm rotation");
    h.pose.palm_rotation = q.normalized();
    for (auto& v : h.fingers.flexion) v = r.u8() / 255.0;
    for (auto& v : h.fingers.curl) v = r.u8() / 255.0;
    return h;
}

}  // namespace

std::optional<std::uint16_t> NameTable::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<std::uint16_t>(i);
    return std::nullopt;
}

NameTable name_table_for(const scene::SceneSnapshot& scene) {
    NameTable t{scene.id(), {}};
    for (const auto& o : scene.objects()) t.names.push_back(o.name);
    return t;
}

std::vector<std::uint8_t> encode_frame(const TelemetryFrame& f, const NameTable& names) {
    Writer w;
    w.out.reserve(kFrameBytes);
    w.bytes(kFrameMagic, 4);
    w.u8(kWireVersion);
    w.u32(static_cast<std::uint32_t>(f.seq));
    w.u32(static_cast<std::uint32_t>(f.gaze.timestamp_ms));
    w.u8(f.gaze.fixating ? 1 : 0);
    std::uint16_t idx = kNoName;
    if (f.gaze.target_name) {
        auto i = names.index_of(*f.gaze.target_name);
        if (!i) throw UnknownTarget(fmt::format("gaze target {} is not in the name table", *f.gaze.target_name));
        idx = *i;
    }
    w.u16(idx);
    for (double v : {f.head_position.x(), f.head_position.y(), f.head_position.z()}) w.f32(v);
    write_hand(w, f.left);
    write_hand(w, f.right);
    return w.out;
}

TelemetryFrame decode_frame(std::span<const std::uint8_t> packet, const NameTable& names) {
    if (packet.size() != kFrameBytes)
        throw InvalidRecord(fmt::format("frame packet has {} bytes, expected {}", packet.size(), kFrameBytes));
    Reader r(packet);
    if (!r.magic(kFrameMagic)) throw InvalidRecord("bad frame magic");
    if (auto v = r.u8(); v != kWireVersion) throw InvalidRecord(fmt::format("unsupported wire version {}", v));
    TelemetryFrame f;
    f.seq = r.u32();
    f.gaze.timestamp_ms = r.u32();
    f.gaze.fixating = (r.u8() & 1) != 0;
    std::uint16_t idx = r.u16();
    if (idx != kNoName) {
        if (idx >= names.names.size()) throw InvalidRecord(fmt::format("gaze name index {} out of range", idx));
        f.gaze.target_name = names.names[idx];
    }
    double hx = r.f32(), hy = r.f32(), hz = r.f32();
    f.head_position = Vec3(hx, hy, hz);
    f.left = read_hand(r, telemetry::Hand::Left);
    f.right = read_hand(r, telemetry::Hand::Right);
    telemetry::validate(f);
    return f;
}

std::vector<std::uint8_t> encode_announce(const NameTable& names) {
    Writer w;
    w.bytes(kAnnounceMagic, 4);
    w.u8(kWireVersion);
    w.u16(static_cast<std::uint16_t>(names.names.size()));
    w.str8(names.scene_id);
    for (const auto& n : names.names) w.str8(n);
    return w.out;
}

NameTable decode_announce(std::span<const std::uint8_t> packet) {
    Reader r(packet);
    if (!r.magic(kAnnounceMagic)) throw InvalidRecord("bad announce magic");
    if (auto v = r.u8(); v != kWireVersion) throw InvalidRecord(fmt::format("unsupported wire version {}", v));
    std::size_t n = r.u16();
    NameTable t;
    t.scene_id = r.str8();
    for (std::size_t i = 0; i < n; ++i) t.names.push_back(r.str8());
    if (r.pos != packet.size()) throw InvalidRecord("trailing bytes after announce");
    return t;
}

std::optional<TelemetryFrame> DatagramDecoder::feed(std::span<const std::uint8_t> packet) {
    try {
        if (packet.size() >= 4 && std::memcmp(packet.data(), kAnnounceMagic, 4) == 0) {
            names_ = decode_announce(packet);
            ++announces_;
            return std::nullopt;
        }
        auto f = decode_frame(packet, names_);
        ++decoded_;
        return f;
    } catch (const InvalidRecord&) {
        ++dropped_;
        return std::nullopt;
    }
}

void ReorderBuffer::release(std::vector<TelemetryFrame>& out, double now_ms) {
    while (!pending_.empty()) {
        auto it = pending_.begin();
        double oldest = now_ms;
        for (const auto& [seq, held] : pending_) oldest = std::min(oldest, held.arrived_ms);
        const bool waited = now_ms - oldest >= hold_ms_;
        if (!next_) {
            // The stream start is unknown: give earlier frames the hold time.
            if (!waited) break;
            next_ = it->first;
        }
        if (it->first == *next_) {
            out.push_back(std::move(it->second.frame));
            next_ = it->first + 1;
            pending_.erase(it);
            continue;
        }
        if (!waited) break;
        skipped_ += it->first - *next_;
        next_ = it->first;
    }
}

std::vector<TelemetryFrame> ReorderBuffer::push(TelemetryFrame frame, double now_ms) {
    std::vector<TelemetryFrame> out;
    if (next_ && frame.seq < *next_) {
        ++late_;
    } else {
        auto seq = frame.seq;
        pending_.try_emplace(seq, Held{std::move(frame), now_ms});
    }
    release(out, now_ms);
    return out;
}

std::vector<TelemetryFrame> ReorderBuffer::poll(double now_ms) {
    std::vector<TelemetryFrame> out;
    release(out, now_ms);
    return out;
}

std::vector<TelemetryFrame> ReorderBuffer::flush() {
    std::vector<TelemetryFrame> out;
    for (auto& [seq, held] : pending_) {
        if (next_ && seq > *next_) skipped_ += seq - *next_;
        out.push_back(std::move(held.frame));
        next_ = seq + 1;
    }
    pending_.clear();
    return out;
}

UdpIngestor::UdpIngestor(const std::string& host, int port, NameTable names, std::size_t queue_capacity)
    : queue_(queue_capacity), decoder_(std::move(names)) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw IoError("cannot create udp socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw IoError("bad udp host " + host);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd_);
        throw IoError(fmt::format("cannot bind udp {}:{}: {}", host, port, std::strerror(errno)));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

UdpIngestor::~UdpIngestor() {
    stop();
    if (fd_ >= 0) ::close(fd_);
}

void UdpIngestor::start(Sink sink) {
    if (running_.exchange(true)) return;
    sink_ = std::move(sink);
    receiver_ = std::thread([this] { receive_loop(); });
    dispatcher_ = std::thread([this] { dispatch_loop(); });
}

void UdpIngestor::stop() {
    if (!running_.exchange(false)) return;
    queue_.close();
    if (receiver_.joinable()) receiver_.join();
    if (dispatcher_.joinable()) dispatcher_.join();
}

void UdpIngestor::receive_loop() {
    std::vector<std::uint8_t> buf(2048);
    while (running_) {
        pollfd p{fd_, POLLIN, 0};
        if (::poll(&p, 1, 50) <= 0) continue;
        auto n = ::recv(fd_, buf.data(), buf.size(), 0);
        if (n < 0) continue;
        ++received_;
        queue_.push(std::vector<std::uint8_t>(buf.begin(), buf.begin() + n));
    }
}

void UdpIngestor::dispatch_loop() {
    auto now = [] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
    };
    while (running_) {
        auto packet = queue_.pop(std::chrono::milliseconds(20));
        std::vector<TelemetryFrame> ready;
        {
            std::lock_guard lk(stats_mutex_);
            if (packet) {
                if (auto f = decoder_.feed(*packet)) ready = reorder_.push(std::move(*f), now());
            } else {
                ready = reorder_.poll(now());
            }
        }
        for (const auto& f : ready) sink_(f);
    }
}

IngestStats UdpIngestor::stats() const {
    std::lock_guard lk(stats_mutex_);
    return {received_.load(),    decoder_.decoded(),     decoder_.dropped(),
            queue_.overflow(),   reorder_.late_drops(),  decoder_.announces()};
}

}  // namespace siagent::service

#include <cmath>
#include <numbers>
#include <thread>

#include "siagent/core/clock.hpp"
#include "siagent/core/error.hpp"
#include "siagent/core/geometry.hpp"

namespace siagent {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::EmptyWindow: return "EmptyWindow";
        case ErrorKind::WindowIncomplete: return "WindowIncomplete";
        case ErrorKind::OrderViolation: return "OrderViolation";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::UnknownTarget: return "UnknownTarget";
        case ErrorKind::InvalidDirection: return "InvalidDirection";
        case ErrorKind::InvalidRecord: return "InvalidRecord";
        case ErrorKind::StateError: return "StateError";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::BackendError: return "BackendError";
        case ErrorKind::BackendTimeout: return "BackendTimeout";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::MockMiss: return "MockMiss";
        case ErrorKind::ParseFailure: return "ParseFailure";
        case ErrorKind::InputError: return "InputError";
        case ErrorKind::PlanRejected: return "PlanRejected";
        case ErrorKind::PlanFailure: return "PlanFailure";
        case ErrorKind::PatternError: return "PatternError";
        case ErrorKind::EmptyBatch: return "EmptyBatch";
        case ErrorKind::Conflict: return "Conflict";
        case ErrorKind::NotFound: return "NotFound";
    }
    return "Unknown";
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

double angle_between_deg(const Quat& a, const Quat& b) {
    // |dot| handles the double cover; clamp guards acos against rounding.
    const double d = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
    return rad_to_deg(2.0 * std::acos(d));
}

double SteadyClock::now_ms() const {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

void SteadyClock::sleep_ms(double ms) {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

void SimulatedClock::advance(double ms) {
    double cur = now_.load();
    while (!now_.compare_exchange_weak(cur, cur + ms)) {
    }
}

}  // namespace siagent

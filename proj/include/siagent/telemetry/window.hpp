#pragma once

#include <optional>
#include <vector>

#include "siagent/telemetry/types.hpp"

namespace siagent::telemetry {

/// Collects live frames into a demonstration window between an explicit
/// start and either an explicit stop or the nominal 90-frame span.
class WindowAssembler {
public:
    void start();
    bool collecting() const { return collecting_; }
    std::size_t pending() const { return frames_.size(); }

    /// Returns the sealed window when this frame completes the span. A frame
    /// whose seq lies past the span seals the window without being included.
    std::optional<DemonstrationWindow> push(const TelemetryFrame& frame);

    /// Seals what has been collected. Throws WindowIncomplete below the
    /// 85-frame minimum; the partial data is discarded either way.
    DemonstrationWindow stop();

private:
    DemonstrationWindow seal();

    bool collecting_ = false;
    std::optional<std::uint64_t> first_seq_;
    std::vector<TelemetryFrame> frames_;
};

}  // namespace siagent::telemetry

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evd::events {

struct OrderingError : std::invalid_argument {
    OrderingError() : std::invalid_argument("event stream is not time-sorted") {}
};

/// Raw sensor event. Polarity is carried for I/O fidelity; the detection
/// stages count all events regardless of sign.
struct Event {
    int x = 0;
    int y = 0;
    double t = 0.0;      ///< seconds
    std::int8_t polarity = 1;  ///< +1 or -1
};

/// Motion-compensated event: real-valued warped pixel position, original
/// timestamp. `depth_compensated` records whether the translational stage
/// found a valid depth for this event.
struct WarpedEvent {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
    std::int8_t polarity = 1;
    bool depth_compensated = false;
};

/// Events of one fixed time window [t0, t0 + dt), time-sorted.
struct EventBuffer {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<Event> events;

    bool empty() const { return events.empty(); }
    std::size_t size() const { return events.size(); }
};

/// Default window length, seconds.
inline constexpr double kDefaultWindow = 0.025;

/// Partition a time-sorted stream into consecutive non-overlapping windows of
/// length `dt`, anchored at the first event. Empty interior windows are kept
/// so window indices map linearly to time. Throws OrderingError on unsorted
/// input.
std::vector<EventBuffer> window_stream(std::span<const Event> stream, double dt);

/// Per-pixel aggregate of the events landing on one pixel after warping and
/// rounding. Count, timestamp sum and timestamp min/max are enough for every
/// downstream image; the full timestamp sets are never materialized.
struct PixelGrid {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> count;
    std::vector<double> time_sum;
    std::vector<double> time_min;
    std::vector<double> time_max;
    std::size_t dropped = 0;  ///< events whose warped position left the frame

    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
    std::uint32_t count_at(int x, int y) const { return count[idx(x, y)]; }
};

/// Group compensated events by nearest integer pixel. Sub-pixel coordinates
/// round to nearest; events outside the frame are dropped and counted.
PixelGrid group_by_pixel(std::span<const WarpedEvent> events, int width, int height);

/// Round a warped coordinate to its integer pixel. Returns false if it falls
/// off the sensor.
bool round_to_pixel(const WarpedEvent& e, int width, int height, int& px, int& py);

/// Event file I/O. Format: header line `# width=W height=H`, then one event
/// per line as `t,x,y,polarity` with t in seconds.
struct EventFile {
    int width = 0;
    int height = 0;
    std::vector<Event> events;
};

EventFile load_event_file(const std::string& path);
void save_event_file(const std::string& path, const EventFile& file);

}  // namespace evd::events

#include "evd/event_core.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace evd::events {

std::vector<EventBuffer> window_stream(std::span<const Event> stream, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("window length must be positive");
    std::vector<EventBuffer> out;
    if (stream.empty()) return out;

    const double t_anchor = stream.front().t;
    double prev = t_anchor;
    std::size_t window_index = 0;
    EventBuffer current;
    current.t0 = t_anchor;
    current.dt = dt;

    for (const Event& e : stream) {
        if (e.t < prev) throw OrderingError{};
        prev = e.t;
        // Windows are half-open [t0 + k*dt, t0 + (k+1)*dt).
        auto k = static_cast<std::size_t>((e.t - t_anchor) / dt);
        while (window_index < k) {
            out.push_back(std::move(current));
            ++window_index;
            current = EventBuffer{};
            current.t0 = t_anchor + static_cast<double>(window_index) * dt;
            current.dt = dt;
        }
        current.events.push_back(e);
    }
    out.push_back(std::move(current));
    return out;
}

bool round_to_pixel(const WarpedEvent& e, int width, int height, int& px, int& py) {
    const long lx = std::lround(e.x);
    const long ly = std::lround(e.y);
    if (lx < 0 || lx >= width || ly < 0 || ly >= height) return false;
    px = static_cast<int>(lx);
    py = static_cast<int>(ly);
    return true;
}

PixelGrid group_by_pixel(std::span<const WarpedEvent> events, int width, int height) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("grid dimensions must be positive");
    PixelGrid g;
    g.width = width;
    g.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    g.count.assign(n, 0);
    g.time_sum.assign(n, 0.0);
    g.time_min.assign(n, std::numeric_limits<double>::infinity());
    g.time_max.assign(n, -std::numeric_limits<double>::infinity());

    for (const WarpedEvent& e : events) {
        int px, py;
        if (!round_to_pixel(e, width, height, px, py)) {
            ++g.dropped;
            continue;
        }
        const std::size_t i = g.idx(px, py);
        g.count[i] += 1;
        g.time_sum[i] += e.t;
        if (e.t < g.time_min[i]) g.time_min[i] = e.t;
        if (e.t > g.time_max[i]) g.time_max[i] = e.t;
    }
    return g;
}

EventFile load_event_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open event file: " + path);
    EventFile f;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty event file (missing header)");
    if (std::sscanf(line.c_str(), "# width=%d height=%d", &f.width, &f.height) != 2)
        throw std::runtime_error(path + ":1: expected header '# width=W height=H'");
    if (f.width <= 0 || f.height <= 0)
        throw std::runtime_error(path + ":1: non-positive sensor dimensions");

    std::size_t lineno = 1;
    double t;
    int x, y, pol;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (std::sscanf(line.c_str(), "%lf,%d,%d,%d", &t, &x, &y, &pol) != 4)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed event line");
        Event e;
        e.t = t;
        e.x = x;
        e.y = y;
        e.polarity = static_cast<std::int8_t>(pol >= 0 ? 1 : -1);
        f.events.push_back(e);
    }
    return f;
}

void save_event_file(const std::string& path, const EventFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write event file: " + path);
    out << "# width=" << file.width << " height=" << file.height << "\n";
    char buf[96];
    for (const Event& e : file.events) {
        std::snprintf(buf, sizeof(buf), "%.9f,%d,%d,%d\n", e.t, e.x, e.y,
                      static_cast<int>(e.polarity));
        out << buf;
    }
}

}  // namespace evd::events

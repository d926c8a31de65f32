#include "evd/image.hpp"

#include <cctype>
#include <fstream>

namespace evd::img {

void write_pgm16(const std::string& path, int width, int height,
                 const std::vector<std::uint16_t>& samples) {
    if (samples.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("pgm sample count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write pgm: " + path);
    out << "P5\n" << width << " " << height << "\n65535\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::uint16_t v = samples[static_cast<std::size_t>(y) * width + x];
            row[2 * x] = static_cast<unsigned char>(v >> 8);
            row[2 * x + 1] = static_cast<unsigned char>(v & 0xFF);
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
}

namespace {

// Reads the next whitespace/comment-delimited token of a PNM header.
int next_header_int(std::istream& in, const std::string& path) {
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            break;
        }
    }
    if (c == EOF) throw std::runtime_error(path + ": truncated pgm header");
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw std::runtime_error(path + ": malformed pgm header");
    return value;
}

}  // namespace

Pgm16 read_pgm16(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open pgm: " + path);
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw std::runtime_error(path + ": not a binary pgm (P5)");
    Pgm16 img;
    img.width = next_header_int(in, path);
    img.height = next_header_int(in, path);
    const int maxval = next_header_int(in, path);
    if (maxval != 65535)
        throw std::runtime_error(path + ": expected 16-bit pgm (maxval 65535)");
    // Header terminator was consumed by next_header_int's trailing get().
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    std::vector<unsigned char> raw(n * 2);
    // The single whitespace after maxval was already consumed as the digit
    // loop's terminator, so sample data starts here.
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw std::runtime_error(path + ": truncated pgm data");
    img.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        img.samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    return img;
}

}  // namespace evd::img

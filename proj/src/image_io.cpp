#include "blinktag/image_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "blinktag/errors.hpp"

namespace blinktag {

std::string frame_to_pgm(const Frame& frame) {
    std::string out = "P5\n" + std::to_string(frame.width) + " " +
                      std::to_string(frame.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(frame.pixels.data()), frame.pixels.size());
    return out;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

Frame frame_from_pgm(const std::string& data) {
    std::istringstream in(data, std::ios::binary);
    if (next_token(in) != "P5") throw IoError("not a binary PGM (P5) image");
    Frame frame;
    try {
        frame.width = std::stoi(next_token(in));
        frame.height = std::stoi(next_token(in));
        const int maxval = std::stoi(next_token(in));
        if (maxval != 255) throw IoError("only maxval 255 is supported");
    } catch (const std::logic_error&) {
        throw IoError("malformed PGM header");
    }
    if (frame.width <= 0 || frame.height <= 0) throw IoError("bad PGM dimensions");

    // exactly one whitespace byte separates header and raster; already
    // consumed by the tokenizer
    frame.pixels.resize(static_cast<std::size_t>(frame.width) * frame.height);
    in.read(reinterpret_cast<char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(frame.pixels.size()))
        throw IoError("PGM raster truncated");
    return frame;
}

void write_pgm(const Frame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const std::string data = frame_to_pgm(frame);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed: " + path);
}

Frame read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return frame_from_pgm(buf.str());
}

Frame binary_to_frame(const BinaryImage& b) {
    Frame f{b.width, b.height, std::vector<std::uint8_t>(b.bits.size())};
    for (std::size_t i = 0; i < b.bits.size(); ++i) f.pixels[i] = b.bits[i] ? 255 : 0;
    return f;
}

}  // namespace blinktag

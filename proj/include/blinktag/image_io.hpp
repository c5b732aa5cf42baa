#pragma once

#include <string>

#include "blinktag/detector.hpp"
#include "blinktag/optics.hpp"

namespace blinktag {

// Binary PGM (P5, maxval 255). Round-trips are bit-exact.
std::string frame_to_pgm(const Frame& frame);
Frame frame_from_pgm(const std::string& bytes);

void write_pgm(const Frame& frame, const std::string& path);
Frame read_pgm(const std::string& path);

// 0/255 visualization of a binary image, e.g. for debug dumps.
Frame binary_to_frame(const BinaryImage& b);

}  // namespace blinktag

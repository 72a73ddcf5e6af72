#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "errors.hpp"

namespace tokmerge {

// Binary PGM (P5), 8-bit.
inline void write_pgm(const std::string& path, int width, int height,
                      const std::vector<uint8_t>& pixels) {
  if (int(pixels.size()) != width * height) throw ShapeError("write_pgm: size mismatch");
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ResourceError("cannot open for writing: " + path);
  std::fprintf(f, "P5\n%d %d\n255\n", width, height);
  std::fwrite(pixels.data(), 1, pixels.size(), f);
  std::fclose(f);
}

}  // namespace tokmerge

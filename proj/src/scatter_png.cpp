#include "flowmap/scatter_png.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

namespace flowmap {

namespace {

std::uint32_t crc32(const unsigned char* data, std::size_t len,
                    std::uint32_t crc = 0xffffffffu) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  for (std::size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc;
}

std::uint32_t adler32(const std::vector<unsigned char>& data) {
  std::uint32_t a = 1, b = 0;
  for (unsigned char c : data) {
    a = (a + c) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(std::ofstream& os, const char type[4],
               const std::vector<unsigned char>& data) {
  std::vector<unsigned char> head;
  put_be32(head, static_cast<std::uint32_t>(data.size()));
  os.write(reinterpret_cast<const char*>(head.data()), 4);
  os.write(type, 4);
  if (!data.empty())
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size()));
  std::uint32_t crc = crc32(reinterpret_cast<const unsigned char*>(type), 4);
  crc = crc32(data.data(), data.size(), crc) ^ 0xffffffffu;
  std::vector<unsigned char> tail;
  put_be32(tail, crc);
  os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

std::vector<unsigned char> zlib_stored(const std::vector<unsigned char>& raw) {
  std::vector<unsigned char> out;
  out.push_back(0x78);  // deflate, 32k window
  out.push_back(0x01);
  std::size_t pos = 0;
  do {
    std::size_t n = std::min<std::size_t>(raw.size() - pos, 65535);
    bool last = pos + n == raw.size();
    out.push_back(last ? 1 : 0);  // stored block, BFINAL on the last
    out.push_back(static_cast<unsigned char>(n & 0xff));
    out.push_back(static_cast<unsigned char>(n >> 8));
    out.push_back(static_cast<unsigned char>(~n & 0xff));
    out.push_back(static_cast<unsigned char>((~n >> 8) & 0xff));
    out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + n);
    pos += n;
  } while (pos < raw.size());
  put_be32(out, adler32(raw));
  return out;
}

struct Color {
  unsigned char r, g, b;
};

Color color_for(int label) {
  if (label == 0) return {31, 119, 180};  // blue
  if (label == 1) return {213, 94, 0};    // vermilion
  return {64, 74, 96};                    // slate
}

}  // namespace

void write_scatter_png(const std::string& path, const Mat& points,
                       const IVec* labels, const ScatterStyle& style) {
  if (points.cols() < 2)
    throw ConfigError("scatter plot needs at least two coordinate columns");
  if (labels && labels->size() != points.rows())
    throw ConfigError("scatter label column length mismatch");
  if (style.size < 16 || style.size > 4096 || !(style.hi > style.lo) ||
      style.point_radius < 0)
    throw ConfigError("bad scatter style");

  int n = style.size;
  std::vector<unsigned char> pix(static_cast<std::size_t>(n) * n * 3, 255);
  auto paint = [&](int px, int py, Color c) {
    if (px < 0 || px >= n || py < 0 || py >= n) return;
    std::size_t at = (static_cast<std::size_t>(py) * n + px) * 3;
    pix[at] = c.r;
    pix[at + 1] = c.g;
    pix[at + 2] = c.b;
  };
  double scale = n / (style.hi - style.lo);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double x = points(i, 0), y = points(i, 1);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    int px = static_cast<int>((x - style.lo) * scale);
    int py = n - 1 - static_cast<int>((y - style.lo) * scale);
    Color c = color_for(labels ? (*labels)(i) : -1);
    for (int dy = -style.point_radius; dy <= style.point_radius; ++dy)
      for (int dx = -style.point_radius; dx <= style.point_radius; ++dx)
        if (dx * dx + dy * dy <= style.point_radius * style.point_radius)
          paint(px + dx, py + dy, c);
  }

  // Raw image stream: each scanline prefixed by filter type 0.
  std::vector<unsigned char> raw;
  raw.reserve(pix.size() + n);
  for (int row = 0; row < n; ++row) {
    raw.push_back(0);
    auto begin = pix.begin() + static_cast<std::size_t>(row) * n * 3;
    raw.insert(raw.end(), begin, begin + static_cast<std::size_t>(n) * 3);
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open image '" + path + "' to write");
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a,
                                       '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);
  std::vector<unsigned char> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(n));
  put_be32(ihdr, static_cast<std::uint32_t>(n));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // no interlace
  put_chunk(os, "IHDR", ihdr);
  put_chunk(os, "IDAT", zlib_stored(raw));
  put_chunk(os, "IEND", {});
  if (!os) throw ConfigError("write failed for image '" + path + "'");
}

}  // namespace flowmap

// Copyright 2026 The wsirisk Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal PNG codec over zlib, covering the formats this pipeline produces
// and consumes: 8-bit non-interlaced grayscale and truecolor, with alpha
// accepted on read and dropped. Palette and 16-bit images are rejected.

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wsirisk/common.hpp"
#include "wsirisk/image.hpp"

namespace wsirisk {

namespace png_detail {

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::uint8_t* payload, std::size_t len) {
  put_u32be(out, static_cast<std::uint32_t>(len));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload, payload + len);
  const uLong crc = ::crc32(0L, out.data() + crc_start, static_cast<uInt>(len + 4));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace png_detail

inline std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) throw IoError("encode_png: empty image");
  const int bpp = img.channels;
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * bpp;

  // Filter type 0 (None) per scanline.
  std::vector<std::uint8_t> raw((row_bytes + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* dst = raw.data() + static_cast<std::size_t>(y) * (row_bytes + 1);
    dst[0] = 0;
    std::memcpy(dst + 1, img.px(0, y), row_bytes);
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw IoError("encode_png: deflate failed");
  comp.resize(comp_len);

  std::vector<std::uint8_t> out;
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.insert(out.end(), sig, sig + 8);

  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(img.width);
  ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(img.height);
  ihdr[8] = 8;                                          // bit depth
  ihdr[9] = (img.channels == 3) ? 2 : 0;                // color type
  ihdr[10] = 0;                                         // compression
  ihdr[11] = 0;                                         // filter
  ihdr[12] = 0;                                         // interlace
  png_detail::append_chunk(out, "IHDR", ihdr, 13);
  png_detail::append_chunk(out, "IDAT", comp.data(), comp.size());
  png_detail::append_chunk(out, "IEND", nullptr, 0);
  return out;
}

inline void write_png(const std::string& path, const Image& img) {
  const std::vector<std::uint8_t> bytes = encode_png(img);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("write_png: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write_png: write failed for " + path);
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes,
                        const std::string& origin = "<memory>") {
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
    throw IoError("decode_png: not a PNG: " + origin);

  std::size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = 0, interlace = 0;
  bool seen_ihdr = false;
  std::vector<std::uint8_t> idat;

  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = png_detail::get_u32be(bytes.data() + pos);
    if (pos + 12 + len > bytes.size())
      throw IoError("decode_png: truncated chunk in " + origin);
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* payload = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw IoError("decode_png: bad IHDR in " + origin);
      width = static_cast<int>(png_detail::get_u32be(payload));
      height = static_cast<int>(png_detail::get_u32be(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }

  if (!seen_ihdr || width <= 0 || height <= 0)
    throw IoError("decode_png: missing or bad IHDR in " + origin);
  if (bit_depth != 8)
    throw IoError("decode_png: only 8-bit PNGs supported: " + origin);
  if (interlace != 0)
    throw IoError("decode_png: interlaced PNGs not supported: " + origin);
  int src_channels = 0;
  switch (color_type) {
    case 0: src_channels = 1; break;  // gray
    case 2: src_channels = 3; break;  // rgb
    case 4: src_channels = 2; break;  // gray + alpha
    case 6: src_channels = 4; break;  // rgba
    default:
      throw IoError("decode_png: unsupported color type " +
                    std::to_string(color_type) + " in " + origin);
  }

  const std::size_t row_bytes = static_cast<std::size_t>(width) * src_channels;
  std::vector<std::uint8_t> raw((row_bytes + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) !=
          Z_OK ||
      raw_len != raw.size())
    throw IoError("decode_png: inflate failed for " + origin);

  // Unfilter scanlines in place into a prev/cur pair.
  std::vector<std::uint8_t> pixels(row_bytes * height);
  const int bpp = src_channels;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* src = raw.data() + static_cast<std::size_t>(y) * (row_bytes + 1);
    const std::uint8_t filter = src[0];
    std::uint8_t* cur = pixels.data() + static_cast<std::size_t>(y) * row_bytes;
    const std::uint8_t* prev =
        (y > 0) ? pixels.data() + static_cast<std::size_t>(y - 1) * row_bytes : nullptr;
    for (std::size_t i = 0; i < row_bytes; ++i) {
      const int x = src[1 + i];
      const int a = (i >= static_cast<std::size_t>(bpp)) ? cur[i - bpp] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= static_cast<std::size_t>(bpp)) ? prev[i - bpp] : 0;
      int v = 0;
      switch (filter) {
        case 0: v = x; break;
        case 1: v = x + a; break;
        case 2: v = x + b; break;
        case 3: v = x + (a + b) / 2; break;
        case 4: v = x + png_detail::paeth(a, b, c); break;
        default:
          throw IoError("decode_png: bad filter type in " + origin);
      }
      cur[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }

  const int dst_channels = (src_channels >= 3) ? 3 : 1;
  Image img(width, height, dst_channels);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const std::uint8_t* s = pixels.data() + p * src_channels;
    std::uint8_t* d = img.data.data() + p * dst_channels;
    for (int c = 0; c < dst_channels; ++c) d[c] = s[c];
  }
  return img;
}

inline Image read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_png: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes, path);
}

}  // namespace wsirisk

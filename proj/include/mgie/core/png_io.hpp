#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgie/core/image.hpp"

namespace mgie {

// Minimal 8-bit RGB PNG writer/reader. Writes filter-0 rows with a fixed zlib
// level so output bytes are reproducible; the reader only accepts the same
// subset (which is all this project ever produces).

namespace pngdetail {

inline uint32_t crc32_of(const std::vector<uint8_t>& data) {
    return static_cast<uint32_t>(::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

inline void put_be32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(x >> 24); v.push_back(x >> 16); v.push_back(x >> 8); v.push_back(x);
}

inline void write_chunk(std::ofstream& os, const char type[4], const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> hdr;
    put_be32(hdr, static_cast<uint32_t>(payload.size()));
    os.write(reinterpret_cast<const char*>(hdr.data()), 4);
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    std::vector<uint8_t> crc;
    put_be32(crc, crc32_of(body));
    os.write(reinterpret_cast<const char*>(crc.data()), 4);
}

inline uint32_t get_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

}  // namespace pngdetail

inline void write_png(const std::string& path, const Image& im) {
    // raw scanlines: filter byte 0 + RGB
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(im.h) * (1 + 3 * im.w));
    for (int y = 0; y < im.h; ++y) {
        raw.push_back(0);
        for (int x = 0; x < im.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(im.at(y, x, c), 0.0, 1.0);
                raw.push_back(static_cast<uint8_t>(std::lround(255.0 * v)));
            }
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    comp.resize(comp_len);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("png: cannot open for writing: " + path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    os.write(reinterpret_cast<const char*>(sig), 8);
    std::vector<uint8_t> ihdr;
    pngdetail::put_be32(ihdr, static_cast<uint32_t>(im.w));
    pngdetail::put_be32(ihdr, static_cast<uint32_t>(im.h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type RGB
    ihdr.push_back(0); ihdr.push_back(0); ihdr.push_back(0);
    pngdetail::write_chunk(os, "IHDR", ihdr);
    pngdetail::write_chunk(os, "IDAT", comp);
    pngdetail::write_chunk(os, "IEND", {});
    if (!os) throw std::runtime_error("png: write failed: " + path);
}

inline Image read_png(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("png: cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) != 0)
        throw std::runtime_error("png: bad signature: " + path);
    size_t pos = 8;
    int w = 0, h = 0;
    std::vector<uint8_t> idat;
    while (pos + 8 <= bytes.size()) {
        uint32_t len = pngdetail::get_be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("png: truncated: " + path);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const uint8_t* payload = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            w = static_cast<int>(pngdetail::get_be32(payload));
            h = static_cast<int>(pngdetail::get_be32(payload + 4));
            if (payload[8] != 8 || payload[9] != 2 || payload[12] != 0)
                throw std::runtime_error("png: unsupported format (expect 8-bit RGB): " + path);
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (w <= 0 || h <= 0) throw std::runtime_error("png: missing IHDR: " + path);
    uLongf raw_len = static_cast<uLongf>(h) * (1 + 3 * static_cast<uLongf>(w));
    std::vector<uint8_t> raw(raw_len);
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw std::runtime_error("png: inflate failed: " + path);
    Image im(h, w);
    for (int y = 0; y < h; ++y) {
        const uint8_t* row = &raw[static_cast<size_t>(y) * (1 + 3 * w)];
        if (row[0] != 0) throw std::runtime_error("png: unsupported row filter: " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(y, x, c) = row[1 + 3 * x + c] / 255.0;
    }
    return im;
}

}  // namespace mgie

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vsense/errors.hpp"

namespace vsense {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

/// Little-endian binary writer over an in-memory buffer; the buffer is
/// flushed to disk atomically (temp file + rename) so failed runs never
/// leave partial artifacts.
struct ByteWriter {
    std::vector<unsigned char> buf;

    void bytes(const void* p, size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u16(uint16_t v) { bytes(&v, 2); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
    void f32s(const float* p, size_t n) { bytes(p, n * 4); }
    void magic(const char m[4]) { bytes(m, 4); }

    void save(const std::string& path) const { atomic_write(path, buf.data(), buf.size()); }

    static void atomic_write(const std::string& path, const void* data, size_t n) {
        namespace fs = std::filesystem;
        fs::path target(path);
        if (target.has_parent_path()) fs::create_directories(target.parent_path());
        fs::path tmp = target;
        tmp += ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) throw format_error("cannot open " + tmp.string() + " for writing");
            f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
            if (!f) throw format_error("short write to " + tmp.string());
        }
        fs::rename(tmp, target);
    }
};

inline void atomic_write_text(const std::string& path, const std::string& text) {
    ByteWriter::atomic_write(path, text.data(), text.size());
}

/// Little-endian reader with position tracking; every failure reports the
/// byte offset it happened at.
struct ByteReader {
    std::vector<unsigned char> buf;
    size_t pos = 0;

    static ByteReader from_file(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw format_error("cannot open " + path);
        ByteReader r;
        f.seekg(0, std::ios::end);
        r.buf.resize(static_cast<size_t>(f.tellg()));
        f.seekg(0);
        f.read(reinterpret_cast<char*>(r.buf.data()), static_cast<std::streamsize>(r.buf.size()));
        if (!f) throw format_error("short read from " + path);
        return r;
    }

    void need(size_t n) const {
        if (pos + n > buf.size()) {
            throw format_error("truncated file: need " + std::to_string(n) + " bytes at offset " +
                               std::to_string(pos) + ", have " + std::to_string(buf.size() - pos));
        }
    }
    void bytes(void* p, size_t n) {
        need(n);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
    uint16_t u16() { uint16_t v; bytes(&v, 2); return v; }
    uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
    uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
    float f32() { float v; bytes(&v, 4); return v; }
    void f32s(float* p, size_t n) { bytes(p, n * 4); }

    void expect_magic(const char m[4], const char* what) {
        char got[4];
        size_t at = pos;
        bytes(got, 4);
        if (std::memcmp(got, m, 4) != 0) {
            throw format_error(std::string("bad magic for ") + what + " at offset " +
                               std::to_string(at));
        }
    }
    bool at_end() const { return pos == buf.size(); }
};

}  // namespace vsense

#pragma once

// Little-endian primitive IO shared by the on-disk formats.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pina_xmc/error.hpp"

namespace pina_xmc::io {

template <class UInt>
void write_le(std::ostream& os, UInt value) {
    char bytes[sizeof(UInt)];
    for (std::size_t b = 0; b < sizeof(UInt); ++b) {
        bytes[b] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * b)) & 0xFF);
    }
    os.write(bytes, sizeof(UInt));
}

inline void write_f32(std::ostream& os, float value) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, sizeof bits);
    write_le<std::uint32_t>(os, bits);
}

template <class UInt>
UInt read_le(std::istream& is, const std::string& what) {
    unsigned char bytes[sizeof(UInt)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
        throw Error(ErrorKind::format, "unexpected end of data while reading " + what);
    }
    std::uint64_t value = 0;
    for (std::size_t b = 0; b < sizeof(UInt); ++b) {
        value |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    }
    return static_cast<UInt>(value);
}

inline float read_f32(std::istream& is, const std::string& what) {
    const auto bits = read_le<std::uint32_t>(is, what);
    float value;
    std::memcpy(&value, &bits, sizeof value);
    return value;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
    return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::io, "cannot open for reading: " + path.string());
    return is;
}

inline std::string read_file(const std::filesystem::path& path) {
    auto is = open_in(path);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    auto os = open_out(path);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw Error(ErrorKind::io, "write failed: " + path.string());
}

// FNV-1a, 64 bit. Used for provenance fingerprints only.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace pina_xmc::io

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kjm/error.hpp"

namespace kjm::detail {

// Shared framing for the dataset and model files:
//   4-byte magic | u16 version | u32 header length | JSON header | payload
struct Container {
    nlohmann::json header;
    std::vector<std::uint8_t> payload;
};

inline std::vector<std::uint8_t> encode_container(std::string_view magic, std::uint16_t version,
                                                  const Container& c) {
    const std::string text = c.header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(10 + text.size() + c.payload.size());
    out.insert(out.end(), magic.begin(), magic.end());
    out.push_back(static_cast<std::uint8_t>(version & 0xFF));
    out.push_back(static_cast<std::uint8_t>(version >> 8));
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xFF));
    }
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), c.payload.begin(), c.payload.end());
    return out;
}

inline Container decode_container(std::string_view magic, std::uint16_t version,
                                  const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), magic.data(), 4) != 0) {
        fail(ErrorCode::CorruptFile, "bad magic, expected " + std::string(magic));
    }
    const std::uint16_t v = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (v != version) {
        fail(ErrorCode::CorruptFile, "unsupported version " + std::to_string(v));
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) {
        len |= static_cast<std::uint32_t>(bytes[6 + i]) << (8 * i);
    }
    if (10 + static_cast<std::size_t>(len) > bytes.size()) {
        fail(ErrorCode::CorruptFile, "header length exceeds file");
    }
    Container c;
    try {
        c.header = nlohmann::json::parse(bytes.begin() + 10, bytes.begin() + 10 + len);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptFile, std::string("header is not valid: ") + e.what());
    }
    c.payload.assign(bytes.begin() + 10 + len, bytes.end());
    return c;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorCode::IoError, "short write to " + path.string());
    }
}

inline void append_floats(std::vector<std::uint8_t>& payload, const std::vector<float>& values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    payload.insert(payload.end(), p, p + values.size() * sizeof(float));
}

inline std::vector<float> take_floats(const std::vector<std::uint8_t>& payload, std::size_t offset,
                                      std::size_t count) {
    if (offset > payload.size() || count > (payload.size() - offset) / sizeof(float)) {
        fail(ErrorCode::CorruptFile, "array extends past the payload");
    }
    std::vector<float> out(count);
    std::memcpy(out.data(), payload.data() + offset, count * sizeof(float));
    return out;
}

}  // namespace kjm::detail

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "semgrid/common.hpp"

namespace semgrid {

/// IEC-61850-SV-flavored frame carrying one consensus payload. The byte
/// layout is normative and bit-exact:
///   magic 0x5347 (2B) | sv_id len (1B) + bytes | conf_rev (4B BE) |
///   smp_cnt (2B BE) | stamp_us (8B BE) | 3 x int32 BE fixed-point 1e-4 |
///   CRC-32 (4B BE) over all preceding bytes
struct SvFrame {
    std::string sv_id;        // ASCII, <= 32 bytes
    uint16_t smp_cnt = 0;     // wrap-around sample counter
    uint32_t conf_rev = 0;
    uint64_t stamp_us = 0;    // source timestamp, microseconds
    std::array<double, 3> values{};  // engineering units, |v| < 2^15

    bool operator==(const SvFrame& o) const = default;
};

enum class DecodeError { bad_magic, truncated, crc_mismatch };

inline const char* to_string(DecodeError e) {
    switch (e) {
        case DecodeError::bad_magic: return "bad_magic";
        case DecodeError::truncated: return "truncated";
        case DecodeError::crc_mismatch: return "crc_mismatch";
    }
    return "unknown";
}

namespace detail {

inline const std::array<uint32_t, 256>& crc32_table() {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

}  // namespace detail

/// CRC-32 (IEEE 802.3, reflected).
inline uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0) {
    uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto& t = detail::crc32_table();
    for (size_t i = 0; i < len; ++i) c = t[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

inline uint32_t crc32(const std::vector<uint8_t>& data) {
    return crc32(data.data(), data.size());
}

namespace detail {

inline void put_be(std::vector<uint8_t>& out, uint64_t v, int bytes) {
    for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

inline uint64_t get_be(const uint8_t* p, int bytes) {
    uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
    return v;
}

inline constexpr double kFixedScale = 1e-4;
inline constexpr double kFixedRange = 32768.0;  // +/- 2^15 engineering units

inline int32_t to_fixed(double v) {
    if (!finite(v) || std::abs(v) >= kFixedRange)
        throw std::invalid_argument("sv_frame: value out of fixed-point range");
    return static_cast<int32_t>(std::llround(v / kFixedScale));
}

inline double from_fixed(int32_t c) { return static_cast<double>(c) * kFixedScale; }

}  // namespace detail

inline constexpr uint16_t kSvMagic = 0x5347;

inline std::vector<uint8_t> encode(const SvFrame& f) {
    if (f.sv_id.size() > 32) throw std::invalid_argument("sv_frame: sv_id longer than 32 bytes");
    std::vector<uint8_t> out;
    out.reserve(34 + f.sv_id.size());
    detail::put_be(out, kSvMagic, 2);
    out.push_back(static_cast<uint8_t>(f.sv_id.size()));
    out.insert(out.end(), f.sv_id.begin(), f.sv_id.end());
    detail::put_be(out, f.conf_rev, 4);
    detail::put_be(out, f.smp_cnt, 2);
    detail::put_be(out, f.stamp_us, 8);
    for (double v : f.values)
        detail::put_be(out, static_cast<uint32_t>(detail::to_fixed(v)), 4);
    detail::put_be(out, crc32(out), 4);
    return out;
}

inline std::variant<SvFrame, DecodeError> decode(const uint8_t* data, size_t len) {
    if (len < 3) return DecodeError::truncated;
    if (detail::get_be(data, 2) != kSvMagic) return DecodeError::bad_magic;
    const size_t id_len = data[2];
    const size_t total = 2 + 1 + id_len + 4 + 2 + 8 + 12 + 4;
    if (len < total) return DecodeError::truncated;
    const uint32_t stored = static_cast<uint32_t>(detail::get_be(data + total - 4, 4));
    if (crc32(data, total - 4) != stored) return DecodeError::crc_mismatch;

    SvFrame f;
    const uint8_t* p = data + 3;
    f.sv_id.assign(reinterpret_cast<const char*>(p), id_len);
    p += id_len;
    f.conf_rev = static_cast<uint32_t>(detail::get_be(p, 4));
    p += 4;
    f.smp_cnt = static_cast<uint16_t>(detail::get_be(p, 2));
    p += 2;
    f.stamp_us = detail::get_be(p, 8);
    p += 8;
    for (int i = 0; i < 3; ++i) {
        f.values[i] = detail::from_fixed(static_cast<int32_t>(detail::get_be(p, 4)));
        p += 4;
    }
    return f;
}

inline std::variant<SvFrame, DecodeError> decode(const std::vector<uint8_t>& bytes) {
    return decode(bytes.data(), bytes.size());
}

/// In-process publish/subscribe bus. Topics are publisher agent ids; delivery
/// is a synchronous callback per subscriber in registration order, so
/// per-topic FIFO holds regardless of subscriber count. Attack policy is not
/// the bus's business — subscribers hand frames to the channel layer.
class LoopbackBus {
public:
    using Handler = std::function<void(const std::vector<uint8_t>&)>;

    void subscribe(int topic, int subscriber, Handler h) {
        subs_[topic].push_back({subscriber, std::move(h)});
    }

    void unsubscribe_all() { subs_.clear(); }

    /// Delivers to all subscribers of the topic; unknown topic is a counted no-op.
    void publish(int topic, const std::vector<uint8_t>& bytes) {
        auto it = subs_.find(topic);
        if (it == subs_.end() || it->second.empty()) {
            ++unknown_topic_count_;
            return;
        }
        for (auto& s : it->second) s.handler(bytes);
    }

    uint64_t unknown_topic_count() const { return unknown_topic_count_; }

private:
    struct Sub {
        int subscriber;
        Handler handler;
    };
    std::map<int, std::vector<Sub>> subs_;
    uint64_t unknown_topic_count_ = 0;
};

}  // namespace semgrid

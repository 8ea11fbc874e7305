#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace iosbc {

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
class Fnv1a {
public:
    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }
    void update(double v) { update(&v, sizeof v); }

    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) {
    Fnv1a h;
    h.update(s);
    return h.digest();
}

/// 16 lowercase hex digits.
inline std::string to_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return out;
}

}  // namespace iosbc

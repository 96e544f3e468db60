#pragma once

#include <cstdint>
#include <string_view>

namespace pvsim {

// FNV-1a 64-bit running hash; used for report digests and final-state
// comparison. Stability across runs/platforms matters, cryptography does not.
class fnv1a {
  public:
    fnv1a& add_byte(uint8_t b) {
        h_ ^= b;
        h_ *= 0x100000001b3ull;
        return *this;
    }
    fnv1a& add_u64(uint64_t v) {
        for (int i = 0; i < 8; i++) add_byte(uint8_t(v >> (8 * i)));
        return *this;
    }
    fnv1a& add_i64(int64_t v) { return add_u64(uint64_t(v)); }
    fnv1a& add_str(std::string_view s) {
        for (char c : s) add_byte(uint8_t(c));
        return *this;
    }
    uint64_t value() const { return h_; }

  private:
    uint64_t h_ = 0xcbf29ce484222325ull;
};

}  // namespace pvsim

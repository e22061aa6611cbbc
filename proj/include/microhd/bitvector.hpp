#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace microhd {

/// Packed fixed-length bit array.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t n_bits) : n_bits_(n_bits), words_((n_bits + 63) / 64, 0) {}

    [[nodiscard]] std::size_t size() const noexcept { return n_bits_; }
    [[nodiscard]] bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
    void set(std::size_t i, bool value = true) noexcept {
        const std::uint64_t mask = std::uint64_t{1} << (i & 63);
        if (value)
            words_[i >> 6] |= mask;
        else
            words_[i >> 6] &= ~mask;
    }
    void clear() noexcept {
        for (auto& w : words_) w = 0;
    }

    [[nodiscard]] std::size_t count() const noexcept {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }

    /// Positions of the set bits, ascending.
    void ones(std::vector<std::uint32_t>& out) const {
        out.clear();
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits) {
                out.push_back(static_cast<std::uint32_t>(w * 64 + static_cast<std::size_t>(std::countr_zero(bits))));
                bits &= bits - 1;
            }
        }
    }

    [[nodiscard]] const std::vector<std::uint64_t>& words() const noexcept { return words_; }

    bool operator==(const BitVector&) const = default;

private:
    std::size_t n_bits_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace microhd

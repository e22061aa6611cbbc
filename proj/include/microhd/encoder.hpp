#pragma once

// Feature vector -> bundled hypervector -> TM literals.
//
// Every rank share is quantized to Q levels and bound to a rank key
// Pi_i = permute(base, i): bid rank i uses slot i, ask rank i slot L + i.
// Spread, mid change and G* share one signed tick codebook and are bound to
// slots 2L, 2L + 1 and 2L + 2 so equal integers in different roles differ.

#include <cstdint>
#include <vector>

#include "microhd/bitvector.hpp"
#include "microhd/features.hpp"
#include "microhd/hypervector.hpp"

namespace microhd {

struct EncoderConfig {
    std::size_t depth = 5;              ///< L
    std::uint32_t q_levels = 16;        ///< Q
    std::int64_t tick_vocab_range = 16; ///< tick symbols span [-range, range]
    HvShape shape{};
    std::uint64_t codebook_seed = 11;
    std::uint64_t rank_seed = 12;
    std::uint64_t tie_seed = 13;

    bool operator==(const EncoderConfig&) const = default;
};

struct EncodeStats {
    std::uint64_t clamped = 0;  ///< tick symbols pulled into the vocabulary range
};

/// min(floor(x * Q), Q - 1). Throws invalid_argument outside [0, 1].
std::uint32_t quantize_unit(double x, std::uint32_t q_levels);

/// Round half away from zero of 2 * g (ticks -> half-tick symbol).
std::int64_t half_tick_symbol(double g_ticks) noexcept;

class Encoder {
public:
    explicit Encoder(EncoderConfig config = {});

    [[nodiscard]] const EncoderConfig& config() const noexcept { return config_; }
    [[nodiscard]] HvShape shape() const noexcept { return config_.shape; }
    [[nodiscard]] const Codebook& codebook() const noexcept { return codebook_; }
    /// Pi_slot.
    [[nodiscard]] const SparseHypervector& rank_key(std::size_t slot) const { return keys_.at(slot); }

    [[nodiscard]] SparseHypervector encode(const FeatureVector& f, EncodeStats* stats = nullptr) const;
    void encode_into(const FeatureVector& f, SparseHypervector& out, EncodeStats* stats = nullptr) const;

private:
    [[nodiscard]] std::size_t tick_slot(std::int64_t symbol, EncodeStats* stats) const noexcept;

    EncoderConfig config_;
    Codebook codebook_;
    std::vector<SparseHypervector> keys_;
    std::vector<std::vector<SparseHypervector>> share_bound_;  // [2L][Q]
    std::vector<std::vector<SparseHypervector>> tick_bound_;   // [3][2 * range + 1]
};

/// Dense expansion: bit s * segment_len + idx is set for each held index.
BitVector to_literal_array(const SparseHypervector& hv);
void to_literal_array(const SparseHypervector& hv, BitVector& out);
/// Inverse of to_literal_array. Throws invalid_argument if a segment has more than one set bit.
SparseHypervector from_literal_array(const BitVector& bits, HvShape shape);

}  // namespace microhd

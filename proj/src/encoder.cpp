#include "microhd/encoder.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace microhd {

std::uint32_t quantize_unit(double x, std::uint32_t q_levels) {
    if (q_levels < 2) throw Error(ErrorCode::invalid_argument, "Q must be >= 2");
    if (!(x >= 0.0 && x <= 1.0))
        throw Error(ErrorCode::invalid_argument, "quantize_unit: " + std::to_string(x) + " outside [0,1]");
    const auto level = static_cast<std::uint32_t>(std::floor(x * static_cast<double>(q_levels)));
    return std::min(level, q_levels - 1);
}

std::int64_t half_tick_symbol(double g_ticks) noexcept {
    return static_cast<std::int64_t>(std::round(2.0 * g_ticks));
}

Encoder::Encoder(EncoderConfig config) : config_(config), codebook_(config.codebook_seed, config.shape) {
    if (config_.depth == 0) throw Error(ErrorCode::invalid_argument, "encoder depth must be >= 1");
    if (config_.q_levels < 2) throw Error(ErrorCode::invalid_argument, "Q must be >= 2");
    if (config_.tick_vocab_range < 1) throw Error(ErrorCode::invalid_argument, "tick_vocab_range must be >= 1");
    const std::size_t L = config_.depth;
    const SparseHypervector base = Codebook::derive(config_.rank_seed, config_.shape, SymbolDomain::rank, 0);
    for (std::size_t slot = 0; slot < 2 * L + 3; ++slot) keys_.push_back(permute(base, slot));

    share_bound_.resize(2 * L);
    for (std::size_t slot = 0; slot < 2 * L; ++slot)
        for (std::uint32_t q = 0; q < config_.q_levels; ++q)
            share_bound_[slot].push_back(bind(keys_[slot], codebook_.get(SymbolDomain::unit_level, q)));

    const std::int64_t r = config_.tick_vocab_range;
    tick_bound_.resize(3);
    for (std::size_t role = 0; role < 3; ++role)
        for (std::int64_t v = -r; v <= r; ++v)
            tick_bound_[role].push_back(bind(keys_[2 * L + role], codebook_.get(SymbolDomain::tick, v)));
}

std::size_t Encoder::tick_slot(std::int64_t symbol, EncodeStats* stats) const noexcept {
    const std::int64_t r = config_.tick_vocab_range;
    const std::int64_t c = std::clamp(symbol, -r, r);
    if (c != symbol && stats) ++stats->clamped;
    return static_cast<std::size_t>(c + r);
}

void Encoder::encode_into(const FeatureVector& f, SparseHypervector& out, EncodeStats* stats) const {
    const std::size_t L = config_.depth;
    if (f.p_bid.size() != L || f.p_ask.size() != L)
        throw Error(ErrorCode::dimension_mismatch, "feature depth " + std::to_string(f.p_bid.size()) +
                                                       " does not match encoder depth " + std::to_string(L));
    constexpr std::size_t kInline = 64;
    std::array<const SparseHypervector*, kInline> inline_parts{};
    std::vector<const SparseHypervector*> heap_parts;
    const std::size_t n = 2 * L + 3;
    const SparseHypervector** parts = inline_parts.data();
    if (n > kInline) {
        heap_parts.resize(n);
        parts = heap_parts.data();
    }
    for (std::size_t i = 0; i < L; ++i) {
        parts[i] = &share_bound_[i][quantize_unit(f.p_bid[i], config_.q_levels)];
        parts[L + i] = &share_bound_[L + i][quantize_unit(f.p_ask[i], config_.q_levels)];
    }
    parts[2 * L] = &tick_bound_[0][tick_slot(f.spread, stats)];
    parts[2 * L + 1] = &tick_bound_[1][tick_slot(f.delta_m.half_ticks, stats)];
    parts[2 * L + 2] = &tick_bound_[2][tick_slot(half_tick_symbol(f.g_star), stats)];
    // A fixed tie stream keeps the encoding a function of the features alone.
    bundle_into(std::span<const SparseHypervector* const>(parts, n), TieBreak{config_.tie_seed, 0}, out);
}

SparseHypervector Encoder::encode(const FeatureVector& f, EncodeStats* stats) const {
    SparseHypervector out(config_.shape);
    encode_into(f, out, stats);
    return out;
}

void to_literal_array(const SparseHypervector& hv, BitVector& out) {
    if (out.size() != hv.dimension()) out = BitVector(hv.dimension());
    else out.clear();
    const std::size_t len = hv.segment_len();
    for (std::size_t s = 0; s < hv.n_segments(); ++s)
        if (hv[s] != SparseHypervector::kEmpty) out.set(s * len + hv[s]);
}

BitVector to_literal_array(const SparseHypervector& hv) {
    BitVector out(hv.dimension());
    to_literal_array(hv, out);
    return out;
}

SparseHypervector from_literal_array(const BitVector& bits, HvShape shape) {
    if (bits.size() != shape.dimension())
        throw Error(ErrorCode::dimension_mismatch, "literal array length does not match the shape");
    SparseHypervector hv(shape);
    std::vector<std::uint32_t> ones;
    bits.ones(ones);
    for (auto b : ones) {
        const std::size_t s = b / shape.segment_len;
        if (hv[s] != SparseHypervector::kEmpty)
            throw Error(ErrorCode::invalid_argument, "segment " + std::to_string(s) + " has more than one set bit");
        hv.set(s, static_cast<SparseHypervector::Index>(b % shape.segment_len));
    }
    return hv;
}

}  // namespace microhd

#pragma once

// Synthetic order flow with a planted depth signal.
//
// The book is a contiguous ladder of `depth` ticks per side. Each step is one
// of:
//   resample  add/cancel one level toward a target size; ranks 2-3 are scaled
//             by a slowly switching regime (-1, 0, +1)
//   trade     a small print at the best level that never empties it
//   move      the best level on one side is swept and refilled from the other
//             side, moving the mid by one tick. The new best quotes are
//             re-sized to fresh rank-1 draws and one level is added/removed
//             at the far ends to keep the depth. All events of a move share
//             one timestamp.
// Move direction: if |imbalance of ranks 2-3| >= threshold it follows the
// imbalance sign with probability p_signal, otherwise it is a coin flip tilted
// by the top-of-book imbalance.

#include <cstdint>
#include <vector>

#include "microhd/book.hpp"

namespace microhd {

struct SynthParams {
    std::size_t n_events = 100000;
    Ticks base_price = 10000;
    std::size_t depth = 8;
    double base_size = 20.0;
    double size_jitter = 0.5;         ///< sizes ~ target * U(1 - j, 1 + j)
    double move_rate = 0.08;          ///< per-step probability of a move
    double trade_rate = 0.0;          ///< per-step probability of a small print
    double regime_switch_rate = 1.0 / 1500.0;
    double regime_scale = 3.0;        ///< ranks 2-3 size multiplier in a regime
    double p_signal = 0.9;
    double signal_threshold = 0.3;
    double top_tilt = 0.6;            ///< P(up) = 0.5 + tilt * (I_top - 0.5) without signal
    double mean_gap_ns = 1.0e6;

    void validate() const;
};

struct SynthStats {
    std::uint64_t steps = 0;
    std::uint64_t moves = 0;
    std::uint64_t signal_moves = 0;    ///< moves taken with |imb23| >= threshold
    std::uint64_t signal_followed = 0; ///< of those, moves in the imbalance direction
    std::uint64_t regime_switches = 0;
    std::uint64_t trades = 0;
};

/// Ranks 2-3 imbalance (B2 + B3 - A2 - A3) / (B2 + B3 + A2 + A3); 0 if those ranks are empty.
double depth_imbalance_23(const BookState& book);

std::vector<OrderEvent> synth_generate(const SynthParams& params, std::uint64_t seed, SynthStats* stats = nullptr);

}  // namespace microhd

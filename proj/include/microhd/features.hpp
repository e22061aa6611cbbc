#pragma once

// Rank volume features of an order book snapshot.

#include <iosfwd>
#include <optional>
#include <vector>

#include "microhd/book.hpp"

namespace microhd {

struct VolumeShares {
    std::vector<double> ask;  ///< A_i / V_total for ranks 1..L
    std::vector<double> bid;  ///< B_i / V_total for ranks 1..L

    bool operator==(const VolumeShares&) const = default;
};

/// F_t: ask shares, bid shares, spread, last mid change, current microprice adjustment.
struct FeatureVector {
    std::vector<double> p_ask;
    std::vector<double> p_bid;
    Ticks spread = 0;
    MidDelta delta_m;
    double g_star = 0.0;  ///< ticks

    [[nodiscard]] std::size_t depth() const noexcept { return p_ask.size(); }
    /// Flat layout (p_ask..., p_bid..., spread, delta_m in ticks, g_star).
    [[nodiscard]] std::vector<double> flatten() const;
    /// Bid and ask sides swapped, mid change and adjustment negated.
    [[nodiscard]] FeatureVector mirrored() const;

    bool operator==(const FeatureVector&) const = default;
};

/// Shares over the first L ranks of each side. V_total only counts those ranks,
/// and missing ranks contribute 0. Throws zero_volume when V_total is 0.
VolumeShares volume_percentages(const BookState& book, std::size_t L);

/// New mid minus previous mid in half ticks; 0 when there is no previous mid.
MidDelta delta_mid(const std::optional<MidPrice>& prev_mid, MidPrice new_mid) noexcept;

/// Throws no_quote for a one-sided book and zero_volume as above.
FeatureVector assemble_feature_vector(const BookState& book, const std::optional<MidPrice>& prev_mid,
                                      double g_star_ticks);
/// Same, with L taken from the book's depth limit and prev_mid from the book.
FeatureVector assemble_feature_vector(const BookState& book, double g_star_ticks);

void write_feature_header(std::ostream& out, std::size_t L);
void write_feature_row(std::ostream& out, std::int64_t ts_ns, const FeatureVector& f);

}  // namespace microhd

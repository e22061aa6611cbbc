#include "microhd/features.hpp"

#include <ostream>

namespace microhd {

FeatureVector FeatureVector::mirrored() const {
    FeatureVector m;
    m.p_ask = p_bid;
    m.p_bid = p_ask;
    m.spread = spread;
    m.delta_m = MidDelta{-delta_m.half_ticks};
    m.g_star = -g_star;
    return m;
}

std::vector<double> FeatureVector::flatten() const {
    std::vector<double> out;
    out.reserve(p_ask.size() + p_bid.size() + 3);
    out.insert(out.end(), p_ask.begin(), p_ask.end());
    out.insert(out.end(), p_bid.begin(), p_bid.end());
    out.push_back(static_cast<double>(spread));
    out.push_back(delta_m.ticks());
    out.push_back(g_star);
    return out;
}

VolumeShares volume_percentages(const BookState& book, std::size_t L) {
    if (L == 0) throw Error(ErrorCode::invalid_argument, "L must be >= 1");
    const auto asks = book.ladder(Side::ask);
    const auto bids = book.ladder(Side::bid);
    const std::size_t na = std::min(L, asks.size());
    const std::size_t nb = std::min(L, bids.size());
    std::int64_t total = 0;
    for (std::size_t i = 0; i < na; ++i) total += asks[i].size;
    for (std::size_t i = 0; i < nb; ++i) total += bids[i].size;
    if (total <= 0) throw Error(ErrorCode::zero_volume, "no volume in the first " + std::to_string(L) + " ranks");
    VolumeShares shares{std::vector<double>(L, 0.0), std::vector<double>(L, 0.0)};
    const double v = static_cast<double>(total);
    for (std::size_t i = 0; i < na; ++i) shares.ask[i] = static_cast<double>(asks[i].size) / v;
    for (std::size_t i = 0; i < nb; ++i) shares.bid[i] = static_cast<double>(bids[i].size) / v;
    return shares;
}

MidDelta delta_mid(const std::optional<MidPrice>& prev_mid, MidPrice new_mid) noexcept {
    if (!prev_mid) return MidDelta{0};
    return MidDelta{new_mid.twice - prev_mid->twice};
}

FeatureVector assemble_feature_vector(const BookState& book, const std::optional<MidPrice>& prev_mid,
                                      double g_star_ticks) {
    const auto mid = mid_price(book);
    if (!mid) throw Error(ErrorCode::no_quote, "feature vector needs both sides quoted");
    auto shares = volume_percentages(book, book.depth_limit());
    FeatureVector f;
    f.p_ask = std::move(shares.ask);
    f.p_bid = std::move(shares.bid);
    f.spread = *spread_ticks(book);
    f.delta_m = delta_mid(prev_mid, *mid);
    f.g_star = g_star_ticks;
    return f;
}

FeatureVector assemble_feature_vector(const BookState& book, double g_star_ticks) {
    return assemble_feature_vector(book, book.prev_mid(), g_star_ticks);
}

void write_feature_header(std::ostream& out, std::size_t L) {
    out << "ts_ns";
    for (std::size_t i = 1; i <= L; ++i) out << ",p_ask_" << i;
    for (std::size_t i = 1; i <= L; ++i) out << ",p_bid_" << i;
    out << ",spread,delta_m_half_ticks,g_star_ticks\n";
}

void write_feature_row(std::ostream& out, std::int64_t ts_ns, const FeatureVector& f) {
    out << ts_ns;
    for (double p : f.p_ask) out << ',' << p;
    for (double p : f.p_bid) out << ',' << p;
    out << ',' << f.spread << ',' << f.delta_m.half_ticks << ',' << f.g_star << '\n';
}

}  // namespace microhd

#include "microhd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace microhd {

void SynthParams::validate() const {
    auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (n_events == 0) throw Error(ErrorCode::invalid_argument, "n_events must be > 0");
    if (depth < 4) throw Error(ErrorCode::invalid_argument, "synthetic depth must be >= 4");
    if (base_price <= static_cast<Ticks>(4 * depth)) throw Error(ErrorCode::invalid_argument, "base_price too low");
    if (!(base_size >= 2.0)) throw Error(ErrorCode::invalid_argument, "base_size must be >= 2");
    if (!(size_jitter >= 0.0 && size_jitter < 1.0)) throw Error(ErrorCode::invalid_argument, "size_jitter must be in [0,1)");
    if (!rate_ok(move_rate) || !rate_ok(trade_rate) || move_rate + trade_rate >= 1.0)
        throw Error(ErrorCode::invalid_argument, "infeasible rates: move_rate + trade_rate must be < 1");
    if (!rate_ok(regime_switch_rate)) throw Error(ErrorCode::invalid_argument, "regime_switch_rate must be in [0,1]");
    if (!(regime_scale >= 1.0)) throw Error(ErrorCode::invalid_argument, "regime_scale must be >= 1");
    if (!(p_signal >= 0.5 && p_signal <= 1.0)) throw Error(ErrorCode::invalid_argument, "p_signal must be in [0.5, 1]");
    if (!(signal_threshold > 0.0 && signal_threshold <= 1.0))
        throw Error(ErrorCode::invalid_argument, "signal_threshold must be in (0, 1]");
    if (!(top_tilt >= 0.0 && top_tilt <= 1.0)) throw Error(ErrorCode::invalid_argument, "top_tilt must be in [0, 1]");
    if (!(mean_gap_ns >= 1.0)) throw Error(ErrorCode::invalid_argument, "mean_gap_ns must be >= 1");
}

double depth_imbalance_23(const BookState& book) {
    const auto b = book.ladder(Side::bid);
    const auto a = book.ladder(Side::ask);
    std::int64_t bid = 0, ask = 0;
    for (std::size_t r = 1; r < 3; ++r) {
        if (r < b.size()) bid += b[r].size;
        if (r < a.size()) ask += a[r].size;
    }
    return bid + ask == 0 ? 0.0 : static_cast<double>(bid - ask) / static_cast<double>(bid + ask);
}

namespace {

class Generator {
public:
    Generator(const SynthParams& p, std::uint64_t seed) : p_(p), rng_(mix_seed(seed, 0x5e1f)) {
        rank_weights_.assign(p_.depth, 1.0);
        rank_weights_[0] = 2.0;
        rank_weights_[1] = 3.0;
        rank_weights_[2] = 3.0;
        for (double w : rank_weights_) weight_total_ += w;
    }

    std::vector<OrderEvent> run(SynthStats& stats) {
        best_bid_ = p_.base_price;
        for (std::size_t r = 0; r < p_.depth && out_.size() < p_.n_events; ++r) {
            advance_clock();
            emit(Action::add, Side::bid, best_bid_ - static_cast<Ticks>(r), draw_size(Side::bid, r));
            bids_.push_back(out_.back().size);
            if (out_.size() >= p_.n_events) break;
            advance_clock();
            emit(Action::add, Side::ask, best_bid_ + 1 + static_cast<Ticks>(r), draw_size(Side::ask, r));
            asks_.push_back(out_.back().size);
        }
        while (out_.size() < p_.n_events) {
            ++stats.steps;
            if (bernoulli(rng_, p_.regime_switch_rate)) {
                // Switch to one of the two other regimes.
                int next = regime_;
                while (next == regime_) next = static_cast<int>(uniform_below(rng_, 3)) - 1;
                regime_ = next;
                ++stats.regime_switches;
            }
            advance_clock();
            const double u = uniform01(rng_);
            const std::size_t room = p_.n_events - out_.size();
            if (u < p_.move_rate && room >= 5 && bids_.size() == p_.depth && asks_.size() == p_.depth) {
                move(stats);
            } else if (u < p_.move_rate + p_.trade_rate) {
                small_trade(stats);
            } else {
                resample();
            }
        }
        return std::move(out_);
    }

private:
    void advance_clock() {
        const double gap = exponential(rng_, 1.0 / p_.mean_gap_ns);
        ts_ += std::max<std::int64_t>(1, static_cast<std::int64_t>(gap));
    }

    void emit(Action a, Side s, Ticks price, std::int64_t size) {
        if (out_.size() >= p_.n_events) return;
        OrderEvent e;
        e.ts_ns = ts_;
        e.action = a;
        e.side = s;
        e.price = price;
        e.size = size;
        out_.push_back(e);
    }

    [[nodiscard]] double target(Side side, std::size_t rank) const {
        double t = p_.base_size;
        if ((rank == 1 || rank == 2) && regime_ != 0) {
            const bool heavy = (regime_ > 0) == (side == Side::bid);
            t *= heavy ? p_.regime_scale : 1.0 / p_.regime_scale;
        }
        return t;
    }

    std::int64_t draw_size(Side side, std::size_t rank) {
        const double j = p_.size_jitter;
        const double x = target(side, rank) * (1.0 - j + 2.0 * j * uniform01(rng_));
        return std::max<std::int64_t>(1, std::llround(x));
    }

    std::deque<std::int64_t>& sizes(Side s) { return s == Side::bid ? bids_ : asks_; }
    [[nodiscard]] Ticks price_at(Side s, std::size_t rank) const {
        return s == Side::bid ? best_bid_ - static_cast<Ticks>(rank) : best_bid_ + 1 + static_cast<Ticks>(rank);
    }

    void set_level(Side s, std::size_t rank, std::int64_t new_size) {
        std::int64_t& cur = sizes(s)[rank];
        if (new_size > cur)
            emit(Action::add, s, price_at(s, rank), new_size - cur);
        else if (new_size < cur)
            emit(Action::cancel, s, price_at(s, rank), cur - new_size);
        cur = new_size;
    }

    void resample() {
        const Side s = bernoulli(rng_, 0.5) ? Side::bid : Side::ask;
        double u = uniform01(rng_) * weight_total_;
        std::size_t rank = 0;
        while (rank + 1 < rank_weights_.size() && u >= rank_weights_[rank]) u -= rank_weights_[rank++];
        if (rank >= sizes(s).size()) return;
        set_level(s, rank, draw_size(s, rank));
    }

    void small_trade(SynthStats& stats) {
        const Side s = bernoulli(rng_, 0.5) ? Side::bid : Side::ask;
        std::int64_t& best = sizes(s).front();
        if (best < 2) return;
        const auto q = static_cast<std::int64_t>(1 + uniform_below(rng_, static_cast<std::uint64_t>(best - 1)));
        emit(Action::trade, s, price_at(s, 0), q);
        best -= q;
        ++stats.trades;
    }

    [[nodiscard]] double imbalance_23() const {
        const double b = static_cast<double>(bids_[1] + bids_[2]);
        const double a = static_cast<double>(asks_[1] + asks_[2]);
        return (b - a) / (b + a);
    }

    void move(SynthStats& stats) {
        const double imb = imbalance_23();
        bool up = false;
        if (std::abs(imb) >= p_.signal_threshold) {
            const bool follow = bernoulli(rng_, p_.p_signal);
            up = (imb > 0) == follow;
            ++stats.signal_moves;
            if (follow) ++stats.signal_followed;
        } else {
            const double top = static_cast<double>(bids_.front()) / static_cast<double>(bids_.front() + asks_.front());
            up = bernoulli(rng_, 0.5 + p_.top_tilt * (top - 0.5));
        }
        ++stats.moves;
        const Side swept = up ? Side::ask : Side::bid;
        const Side refill = opposite(swept);
        const Ticks sweep_price = price_at(swept, 0);
        // Sweep the whole best level.
        emit(Action::trade, swept, sweep_price, sizes(swept).front());
        ++stats.trades;
        sizes(swept).pop_front();
        // Refill on the other side at the swept price.
        const std::int64_t fresh = draw_size(refill, 0);
        emit(Action::add, refill, sweep_price, fresh);
        sizes(refill).push_front(fresh);
        best_bid_ += up ? 1 : -1;
        // The swept side's new best quote gets a fresh rank-1 size.
        set_level(swept, 0, draw_size(swept, 0));
        // Keep both ladders at `depth` levels.
        const std::size_t last = p_.depth - 1;
        const std::int64_t deep = draw_size(swept, last);
        sizes(swept).push_back(deep);
        emit(Action::add, swept, price_at(swept, last), deep);
        const std::int64_t drop = sizes(refill).back();
        emit(Action::cancel, refill, price_at(refill, p_.depth), drop);
        sizes(refill).pop_back();
    }

    const SynthParams& p_;
    Rng rng_;
    std::vector<double> rank_weights_;
    double weight_total_ = 0.0;
    std::vector<OrderEvent> out_;
    std::deque<std::int64_t> bids_, asks_;  // rank order
    Ticks best_bid_ = 0;
    std::int64_t ts_ = 0;
    int regime_ = 0;
};

}  // namespace

std::vector<OrderEvent> synth_generate(const SynthParams& params, std::uint64_t seed, SynthStats* stats) {
    params.validate();
    SynthStats local;
    Generator g(params, seed);
    auto events = g.run(local);
    if (stats) *stats = local;
    return events;
}

}  // namespace microhd

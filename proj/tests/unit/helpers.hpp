#pragma once

#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

#include "microhd/book.hpp"

namespace microhd::test {

inline OrderEvent ev(Action a, Side s, Ticks price, std::int64_t size, std::int64_t ts = 0,
                     std::optional<std::uint64_t> id = std::nullopt) {
    return OrderEvent{ts, a, s, price, size, id};
}

/// Book built from (price, size) lists, best level first.
inline BookState make_book(std::initializer_list<std::pair<Ticks, std::int64_t>> bids,
                           std::initializer_list<std::pair<Ticks, std::int64_t>> asks, std::size_t L = 5) {
    BookConfig cfg;
    cfg.depth_limit = L;
    BookState b(cfg);
    for (auto [p, q] : bids) b.apply(ev(Action::add, Side::bid, p, q));
    for (auto [p, q] : asks) b.apply(ev(Action::add, Side::ask, p, q));
    return b;
}

inline BookState make_book(const std::vector<std::int64_t>& bid_sizes, const std::vector<std::int64_t>& ask_sizes,
                           Ticks best_bid, Ticks best_ask, std::size_t L) {
    BookConfig cfg;
    cfg.depth_limit = L;
    BookState b(cfg);
    for (std::size_t i = 0; i < bid_sizes.size(); ++i)
        if (bid_sizes[i] > 0) b.apply(ev(Action::add, Side::bid, best_bid - static_cast<Ticks>(i), bid_sizes[i]));
    for (std::size_t i = 0; i < ask_sizes.size(); ++i)
        if (ask_sizes[i] > 0) b.apply(ev(Action::add, Side::ask, best_ask + static_cast<Ticks>(i), ask_sizes[i]));
    return b;
}

}  // namespace microhd::test

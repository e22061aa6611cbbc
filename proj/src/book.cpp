#include "microhd/book.hpp"

#include <algorithm>

namespace microhd {

std::string_view to_string(Side side) noexcept { return side == Side::bid ? "bid" : "ask"; }

std::string_view to_string(Action action) noexcept {
    switch (action) {
        case Action::add: return "add";
        case Action::cancel: return "cancel";
        case Action::modify: return "modify";
        case Action::trade: return "trade";
        case Action::clear: return "clear";
    }
    return "?";
}

namespace {

// Position of the first level at or beyond `price` in the side's ordering.
template <typename It>
It lower_bound_level(It first, It last, Side side, Ticks price) {
    if (side == Side::bid)
        return std::lower_bound(first, last, price, [](const Level& l, Ticks p) { return l.price > p; });
    return std::lower_bound(first, last, price, [](const Level& l, Ticks p) { return l.price < p; });
}

std::string describe(const OrderEvent& e) {
    std::string s = std::string(to_string(e.action)) + " " + std::string(to_string(e.side)) + " " +
                    std::to_string(e.price) + "x" + std::to_string(e.size);
    if (e.order_id) s += " id=" + std::to_string(*e.order_id);
    return s;
}

}  // namespace

BookState::BookState(BookConfig config) : config_(config) {
    if (config_.depth_limit == 0) throw Error(ErrorCode::invalid_argument, "depth_limit must be >= 1");
    if (!(config_.tick_size > 0.0)) throw Error(ErrorCode::invalid_argument, "tick_size must be > 0");
}

std::span<const Level> BookState::ladder(Side side) const noexcept { return side_levels(side); }

std::span<const Level> BookState::ranks(Side side) const noexcept {
    const auto& levels = side_levels(side);
    return {levels.data(), std::min(levels.size(), config_.depth_limit)};
}

std::int64_t BookState::size_at(Side side, Ticks price) const noexcept {
    const auto& levels = side_levels(side);
    auto it = lower_bound_level(levels.begin(), levels.end(), side, price);
    return (it != levels.end() && it->price == price) ? it->size : 0;
}

bool BookState::operator==(const BookState& other) const {
    return config_.depth_limit == other.config_.depth_limit && config_.tick_size == other.config_.tick_size &&
           config_.mode == other.config_.mode && bids_ == other.bids_ && asks_ == other.asks_ &&
           orders_ == other.orders_ && last_trade_ == other.last_trade_ && prev_mid_ == other.prev_mid_ &&
           counters_ == other.counters_;
}

std::vector<Level>::iterator BookState::find_level(Side side, Ticks price) {
    auto& levels = side_levels(side);
    auto it = lower_bound_level(levels.begin(), levels.end(), side, price);
    return (it != levels.end() && it->price == price) ? it : levels.end();
}

void BookState::add_to_level(Side side, Ticks price, std::int64_t size) {
    auto& levels = side_levels(side);
    auto it = lower_bound_level(levels.begin(), levels.end(), side, price);
    if (it != levels.end() && it->price == price)
        it->size += size;
    else
        levels.insert(it, Level{price, size});
}

std::int64_t BookState::take_from_level(Side side, Ticks price, std::int64_t size) {
    auto& levels = side_levels(side);
    auto it = find_level(side, price);
    if (it == levels.end()) return 0;
    const std::int64_t taken = std::min(size, it->size);
    it->size -= taken;
    if (it->size == 0) levels.erase(it);
    return taken;
}

bool BookState::rest_or_cross(Side side, Ticks price, std::int64_t& size, std::string& diagnostic) {
    auto& opposite_levels = side_levels(opposite(side));
    auto crosses = [&](const Level& l) { return side == Side::bid ? l.price <= price : l.price >= price; };
    if (!opposite_levels.empty() && crosses(opposite_levels.front())) {
        if (config_.mode == IngestMode::strict) {
            diagnostic = "quote at " + std::to_string(price) + " crosses best " +
                         std::string(to_string(opposite(side))) + " " + std::to_string(opposite_levels.front().price);
            return false;
        }
        while (size > 0 && !opposite_levels.empty() && crosses(opposite_levels.front())) {
            Level& best = opposite_levels.front();
            const std::int64_t fill = std::min(size, best.size);
            best.size -= fill;
            size -= fill;
            last_trade_ = best.price;
            if (best.size == 0) opposite_levels.erase(opposite_levels.begin());
        }
        ++counters_.crossing_fills;
    }
    if (size > 0) add_to_level(side, price, size);
    return true;
}

ApplyStatus BookState::absent(const OrderEvent& e, std::string& diagnostic, const char* what) {
    diagnostic = std::string(what) + ": " + describe(e);
    return config_.mode == IngestMode::strict ? ApplyStatus::rejected : ApplyStatus::ignored;
}

ApplyStatus BookState::on_add(const OrderEvent& e, std::string& diagnostic) {
    if (e.size <= 0) return absent(e, diagnostic, "add with non-positive size");
    if (e.order_id && orders_.contains(*e.order_id)) return absent(e, diagnostic, "duplicate order id");
    std::int64_t remaining = e.size;
    if (!rest_or_cross(e.side, e.price, remaining, diagnostic))
        return ApplyStatus::rejected;
    if (e.order_id && remaining > 0) orders_.emplace(*e.order_id, RestingOrder{e.side, e.price, remaining});
    return ApplyStatus::applied;
}

ApplyStatus BookState::on_cancel(const OrderEvent& e, std::string& diagnostic) {
    if (e.order_id) {
        if (auto it = orders_.find(*e.order_id); it != orders_.end()) {
            RestingOrder& order = it->second;
            const std::int64_t amount =
                (e.size == 0 || e.size >= order.remaining) ? order.remaining : e.size;
            const bool level_present = size_at(order.side, order.price) > 0;
            take_from_level(order.side, order.price, amount);
            order.remaining -= amount;
            if (order.remaining == 0) orders_.erase(it);
            if (!level_present) return absent(e, diagnostic, "cancel of an order whose level is gone");
            return ApplyStatus::applied;
        }
    }
    if (find_level(e.side, e.price) == side_levels(e.side).end())
        return absent(e, diagnostic, "cancel at absent level");
    const std::int64_t want = e.size == 0 ? size_at(e.side, e.price) : e.size;
    take_from_level(e.side, e.price, want);
    return ApplyStatus::applied;
}

ApplyStatus BookState::on_modify(const OrderEvent& e, std::string& diagnostic) {
    if (e.order_id) {
        if (auto it = orders_.find(*e.order_id); it != orders_.end()) {
            const RestingOrder old = it->second;
            orders_.erase(it);
            if (size_at(old.side, old.price) == 0) return absent(e, diagnostic, "modify of an order whose level is gone");
            take_from_level(old.side, old.price, old.remaining);
            std::int64_t remaining = e.size;
            if (remaining > 0) {
                if (!rest_or_cross(old.side, e.price, remaining, diagnostic)) {
                    // Strict mode: put the order back untouched.
                    add_to_level(old.side, old.price, old.remaining);
                    orders_.emplace(*e.order_id, old);
                    return ApplyStatus::rejected;
                }
                if (remaining > 0) orders_.emplace(*e.order_id, RestingOrder{old.side, e.price, remaining});
            }
            return ApplyStatus::applied;
        }
    }
    auto& levels = side_levels(e.side);
    auto it = find_level(e.side, e.price);
    if (it == levels.end()) return absent(e, diagnostic, "modify at absent level");
    if (e.size <= 0)
        levels.erase(it);
    else
        it->size = e.size;
    return ApplyStatus::applied;
}

ApplyStatus BookState::on_trade(const OrderEvent& e, std::string& diagnostic) {
    if (e.size <= 0) return absent(e, diagnostic, "trade with non-positive size");
    Side side = e.side;
    Ticks price = e.price;
    if (e.order_id) {
        if (auto it = orders_.find(*e.order_id); it != orders_.end()) {
            side = it->second.side;
            price = it->second.price;
            it->second.remaining -= std::min(e.size, it->second.remaining);
            if (it->second.remaining == 0) orders_.erase(it);
        }
    }
    if (find_level(side, price) == side_levels(side).end()) return absent(e, diagnostic, "trade at absent level");
    take_from_level(side, price, e.size);
    last_trade_ = price;
    return ApplyStatus::applied;
}

void BookState::on_clear() {
    bids_.clear();
    asks_.clear();
    orders_.clear();
    prev_mid_.reset();
}

ApplyResult BookState::apply(const OrderEvent& e) {
    ApplyResult result;
    if (e.action != Action::clear && (e.price <= 0 || e.size < 0)) {
        result.diagnostic = "invalid price/size: " + describe(e);
        result.status = config_.mode == IngestMode::strict ? ApplyStatus::rejected : ApplyStatus::ignored;
    } else {
        const auto top_before = top_of_book(*this);
        const auto mid_before = mid_price(*this);
        switch (e.action) {
            case Action::add: result.status = on_add(e, result.diagnostic); break;
            case Action::cancel: result.status = on_cancel(e, result.diagnostic); break;
            case Action::modify: result.status = on_modify(e, result.diagnostic); break;
            case Action::trade: result.status = on_trade(e, result.diagnostic); break;
            case Action::clear: on_clear(); break;
        }
        const auto top_after = top_of_book(*this);
        result.top_changed = top_before != top_after;
        if (const auto mid_after = mid_price(*this); mid_before && mid_after && *mid_before != *mid_after)
            prev_mid_ = mid_before;
    }
    switch (result.status) {
        case ApplyStatus::applied: ++counters_.applied; break;
        case ApplyStatus::ignored: ++counters_.ignored; break;
        case ApplyStatus::rejected: ++counters_.rejected; break;
    }
    return result;
}

std::optional<TopOfBook> top_of_book(const BookState& book) noexcept {
    if (!book.two_sided()) return std::nullopt;
    const Level& b = book.bids().front();
    const Level& a = book.asks().front();
    return TopOfBook{b.price, b.size, a.price, a.size};
}

std::optional<MidPrice> mid_price(const BookState& book) noexcept {
    if (!book.two_sided()) return std::nullopt;
    return MidPrice{book.bids().front().price + book.asks().front().price};
}

std::optional<double> imbalance(const BookState& book) noexcept {
    const auto top = top_of_book(book);
    if (!top) return std::nullopt;
    const std::int64_t total = top->bid_size + top->ask_size;
    if (total <= 0) return std::nullopt;
    return static_cast<double>(top->bid_size) / static_cast<double>(total);
}

std::optional<Ticks> spread_ticks(const BookState& book) {
    const auto top = top_of_book(book);
    if (!top) return std::nullopt;
    const Ticks s = top->ask_price - top->bid_price;
    if (s <= 0)
        throw Error(ErrorCode::invariant_violation,
                    "crossed book: bid " + std::to_string(top->bid_price) + " ask " + std::to_string(top->ask_price));
    return s;
}

std::optional<double> weighted_mid(const BookState& book) noexcept {
    const auto top = top_of_book(book);
    const auto i = imbalance(book);
    if (!top || !i) return std::nullopt;
    return *i * static_cast<double>(top->ask_price) + (1.0 - *i) * static_cast<double>(top->bid_price);
}

BookState replay(std::span<const OrderEvent> events, BookConfig config) {
    BookState book(config);
    for (const auto& e : events) book.apply(e);
    return book;
}

}  // namespace microhd

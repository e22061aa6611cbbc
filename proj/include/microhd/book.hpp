#pragma once

// Price-ladder order book rebuilt from order events.
//
// The canonical state is aggregated by price: one (price, size) level per
// tick, bids descending and asks ascending. Order ids are only used to route
// MBO-style deltas to the right level. Every price is an integer tick count;
// mids are kept exactly as bid+ask (twice the mid).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "microhd/common.hpp"

namespace microhd {

enum class Side : std::uint8_t { bid, ask };
enum class Action : std::uint8_t { add, cancel, modify, trade, clear };

constexpr Side opposite(Side s) noexcept { return s == Side::bid ? Side::ask : Side::bid; }

std::string_view to_string(Side side) noexcept;
std::string_view to_string(Action action) noexcept;

struct OrderEvent {
    std::int64_t ts_ns = 0;
    Action action = Action::add;
    Side side = Side::bid;
    Ticks price = 0;
    std::int64_t size = 0;
    std::optional<std::uint64_t> order_id;

    bool operator==(const OrderEvent&) const = default;
};

struct Level {
    Ticks price = 0;
    std::int64_t size = 0;

    bool operator==(const Level&) const = default;
};

struct TopOfBook {
    Ticks bid_price = 0;
    std::int64_t bid_size = 0;
    Ticks ask_price = 0;
    std::int64_t ask_size = 0;

    bool operator==(const TopOfBook&) const = default;
};

/// Mid price held exactly as bid + ask, i.e. in half ticks.
struct MidPrice {
    std::int64_t twice = 0;

    [[nodiscard]] double ticks() const noexcept { return static_cast<double>(twice) / 2.0; }
    auto operator<=>(const MidPrice&) const = default;
};

/// Signed mid change in half ticks.
struct MidDelta {
    std::int64_t half_ticks = 0;

    [[nodiscard]] double ticks() const noexcept { return static_cast<double>(half_ticks) / 2.0; }
    bool operator==(const MidDelta&) const = default;
};

enum class IngestMode : std::uint8_t { lenient, strict };

struct BookConfig {
    std::size_t depth_limit = 5;  ///< ranks exposed to features (L)
    double tick_size = 0.01;
    IngestMode mode = IngestMode::lenient;

    bool operator==(const BookConfig&) const = default;
};

enum class ApplyStatus : std::uint8_t { applied, ignored, rejected };

struct ApplyResult {
    ApplyStatus status = ApplyStatus::applied;
    bool top_changed = false;
    std::string diagnostic;  ///< empty unless ignored/rejected
};

struct BookCounters {
    std::uint64_t applied = 0;
    std::uint64_t ignored = 0;
    std::uint64_t rejected = 0;
    std::uint64_t crossing_fills = 0;  ///< crossing quotes consumed against the book

    bool operator==(const BookCounters&) const = default;
};

class BookState {
public:
    explicit BookState(BookConfig config = {});

    /// Applies one event atomically. Strict mode rejects events that reference
    /// an absent level or would cross the book; lenient mode ignores the former
    /// and consumes crossed levels for the latter.
    ApplyResult apply(const OrderEvent& event);

    [[nodiscard]] const BookConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::size_t depth_limit() const noexcept { return config_.depth_limit; }
    [[nodiscard]] double tick_size() const noexcept { return config_.tick_size; }

    /// Full ladder, best level first.
    [[nodiscard]] std::span<const Level> ladder(Side side) const noexcept;
    /// The first min(depth_limit, size) ranks of a side.
    [[nodiscard]] std::span<const Level> ranks(Side side) const noexcept;
    [[nodiscard]] std::span<const Level> bids() const noexcept { return bids_; }
    [[nodiscard]] std::span<const Level> asks() const noexcept { return asks_; }

    [[nodiscard]] bool two_sided() const noexcept { return !bids_.empty() && !asks_.empty(); }
    [[nodiscard]] bool empty() const noexcept { return bids_.empty() && asks_.empty(); }

    /// Size resting at a price, 0 if the level is absent.
    [[nodiscard]] std::int64_t size_at(Side side, Ticks price) const noexcept;

    [[nodiscard]] const std::optional<Ticks>& last_trade_price() const noexcept { return last_trade_; }
    /// Mid in force before the most recent mid change.
    [[nodiscard]] const std::optional<MidPrice>& prev_mid() const noexcept { return prev_mid_; }
    [[nodiscard]] const BookCounters& counters() const noexcept { return counters_; }

    bool operator==(const BookState& other) const;

private:
    struct RestingOrder {
        Side side;
        Ticks price;
        std::int64_t remaining;
        bool operator==(const RestingOrder&) const = default;
    };

    std::vector<Level>& side_levels(Side side) noexcept { return side == Side::bid ? bids_ : asks_; }
    [[nodiscard]] const std::vector<Level>& side_levels(Side side) const noexcept {
        return side == Side::bid ? bids_ : asks_;
    }

    std::vector<Level>::iterator find_level(Side side, Ticks price);
    void add_to_level(Side side, Ticks price, std::int64_t size);
    /// Removes up to `size` at the level; returns the amount actually removed.
    std::int64_t take_from_level(Side side, Ticks price, std::int64_t size);
    /// Rests `size` at `price`, first consuming opposite levels it crosses.
    bool rest_or_cross(Side side, Ticks price, std::int64_t& size, std::string& diagnostic);

    ApplyStatus on_add(const OrderEvent& e, std::string& diagnostic);
    ApplyStatus on_cancel(const OrderEvent& e, std::string& diagnostic);
    ApplyStatus on_modify(const OrderEvent& e, std::string& diagnostic);
    ApplyStatus on_trade(const OrderEvent& e, std::string& diagnostic);
    void on_clear();

    ApplyStatus absent(const OrderEvent& e, std::string& diagnostic, const char* what);

    BookConfig config_;
    std::vector<Level> bids_;  // descending price
    std::vector<Level> asks_;  // ascending price
    std::unordered_map<std::uint64_t, RestingOrder> orders_;
    std::optional<Ticks> last_trade_;
    std::optional<MidPrice> prev_mid_;
    BookCounters counters_;
};

// --- Top-of-book measurements -------------------------------------------------
// These return std::nullopt as the no-quote / undefined-imbalance signal.

std::optional<TopOfBook> top_of_book(const BookState& book) noexcept;
std::optional<MidPrice> mid_price(const BookState& book) noexcept;
std::optional<double> imbalance(const BookState& book) noexcept;
/// Best ask minus best bid. Throws invariant_violation on a crossed or locked book.
std::optional<Ticks> spread_ticks(const BookState& book);
/// I * P_a + (1 - I) * P_b, in ticks.
std::optional<double> weighted_mid(const BookState& book) noexcept;

/// Replays a stream into a fresh book.
BookState replay(std::span<const OrderEvent> events, BookConfig config = {});

}  // namespace microhd

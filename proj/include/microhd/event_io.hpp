#pragma once

// Event file readers and writers.
//
// Accepted inputs
//   CSV   header `ts_ns,action,side,price,size,order_id` (price in price units,
//         converted with the instrument tick size) or the canonical header
//         `ts_ns,action,side,price_ticks,size,order_id` (integer ticks).
//   JSONL one object per line with the same keys.
//
// Action codes follow MBO conventions:
//   A -> add, C -> cancel, M -> modify, T or F -> trade, R -> clear
// Full names (add, cancel, modify, trade, clear) are accepted as well.
// Sides: B/bid and A/ask (S/sell is accepted for ask). `order_id` may be empty.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "microhd/book.hpp"

namespace microhd {

enum class EventFormat { csv, jsonl };

/// Picks the format from the extension (.jsonl/.json -> jsonl, anything else csv).
EventFormat format_for(const std::filesystem::path& path);

std::optional<Action> parse_action(std::string_view code) noexcept;
std::optional<Side> parse_side(std::string_view code) noexcept;
char action_code(Action action) noexcept;
char side_code(Side side) noexcept;

/// Converts a decimal price to ticks; throws parse_error if it is off the tick grid.
Ticks price_to_ticks(double price, double tick_size);

/// Throws Error(parse_error) naming the 1-based line of the first malformed row.
std::vector<OrderEvent> read_events(std::istream& in, EventFormat format, double tick_size);
std::vector<OrderEvent> read_events(const std::filesystem::path& path, double tick_size);

/// Canonical CSV (integer tick prices).
void write_events(std::ostream& out, std::span<const OrderEvent> events);
void write_events(const std::filesystem::path& path, std::span<const OrderEvent> events);

/// Checks that timestamps never decrease; returns the offending index if they do.
std::optional<std::size_t> first_time_regression(std::span<const OrderEvent> events) noexcept;

}  // namespace microhd

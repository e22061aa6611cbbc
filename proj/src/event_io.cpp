#include "microhd/event_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

namespace microhd {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& message) {
    throw Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + message);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* field) {
    text = trim(text);
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        fail(line, std::string("bad ") + field + " '" + std::string(text) + "'");
    return value;
}

std::vector<std::string_view> split(std::string_view row) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= row.size(); ++i) {
        if (i == row.size() || row[i] == ',') {
            out.push_back(trim(row.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

OrderEvent build_event(std::int64_t ts, std::string_view action, std::string_view side, Ticks price,
                       std::int64_t size, std::optional<std::uint64_t> order_id, std::size_t line) {
    OrderEvent e;
    e.ts_ns = ts;
    const auto a = parse_action(action);
    if (!a) fail(line, "unknown action '" + std::string(action) + "'");
    e.action = *a;
    const auto s = parse_side(side);
    if (!s) {
        // Clears carry no meaningful side in most feeds.
        if (e.action != Action::clear) fail(line, "unknown side '" + std::string(side) + "'");
        e.side = Side::bid;
    } else {
        e.side = *s;
    }
    e.price = price;
    e.size = size;
    e.order_id = order_id;
    if (e.size < 0) fail(line, "negative size");
    if (e.action != Action::clear && e.price <= 0) fail(line, "price must be positive");
    return e;
}

std::vector<OrderEvent> read_csv(std::istream& in, double tick_size) {
    std::vector<OrderEvent> events;
    std::string row;
    std::size_t line = 0;
    bool header_seen = false;
    bool price_in_ticks = false;
    std::array<int, 6> column{};  // ts, action, side, price, size, order_id
    while (std::getline(in, row)) {
        ++line;
        const std::string_view view = trim(row);
        if (view.empty() || view.front() == '#') continue;
        const auto fields = split(view);
        if (!header_seen) {
            column.fill(-1);
            for (std::size_t i = 0; i < fields.size(); ++i) {
                const std::string name = lower(fields[i]);
                if (name == "ts_ns" || name == "ts" || name == "ts_event") column[0] = static_cast<int>(i);
                else if (name == "action") column[1] = static_cast<int>(i);
                else if (name == "side") column[2] = static_cast<int>(i);
                else if (name == "price") column[3] = static_cast<int>(i);
                else if (name == "price_ticks") { column[3] = static_cast<int>(i); price_in_ticks = true; }
                else if (name == "size") column[4] = static_cast<int>(i);
                else if (name == "order_id") column[5] = static_cast<int>(i);
            }
            for (int c = 0; c < 5; ++c)
                if (column[c] < 0) fail(line, "header must name ts_ns,action,side,price,size[,order_id]");
            header_seen = true;
            continue;
        }
        const int needed = *std::max_element(column.begin(), column.begin() + 5) + 1;
        if (static_cast<int>(fields.size()) < needed)
            fail(line, "expected " + std::to_string(needed) + " fields, got " + std::to_string(fields.size()));
        const auto ts = parse_number<std::int64_t>(fields[column[0]], line, "ts_ns");
        Ticks price = 0;
        if (price_in_ticks) {
            price = parse_number<std::int64_t>(fields[column[3]], line, "price_ticks");
        } else {
            const auto p = parse_number<double>(fields[column[3]], line, "price");
            try {
                price = price_to_ticks(p, tick_size);
            } catch (const Error& err) {
                fail(line, err.what());
            }
        }
        const auto size = parse_number<std::int64_t>(fields[column[4]], line, "size");
        std::optional<std::uint64_t> order_id;
        if (column[5] >= 0 && column[5] < static_cast<int>(fields.size()) && !fields[column[5]].empty())
            order_id = parse_number<std::uint64_t>(fields[column[5]], line, "order_id");
        events.push_back(build_event(ts, fields[column[1]], fields[column[2]], price, size, order_id, line));
    }
    return events;
}

std::vector<OrderEvent> read_jsonl(std::istream& in, double tick_size) {
    using nlohmann::json;
    std::vector<OrderEvent> events;
    std::string row;
    std::size_t line = 0;
    while (std::getline(in, row)) {
        ++line;
        const std::string_view view = trim(row);
        if (view.empty()) continue;
        json obj;
        try {
            obj = json::parse(view);
        } catch (const json::exception& err) {
            fail(line, std::string("invalid json: ") + err.what());
        }
        if (!obj.is_object()) fail(line, "expected a json object");
        try {
            const auto ts = obj.at("ts_ns").get<std::int64_t>();
            const auto action = obj.at("action").get<std::string>();
            const std::string side = obj.contains("side") && obj["side"].is_string() ? obj["side"].get<std::string>() : "";
            Ticks price = 0;
            if (obj.contains("price_ticks")) {
                price = obj["price_ticks"].get<std::int64_t>();
            } else {
                const auto& p = obj.at("price");
                price = p.is_null() ? 0 : price_to_ticks(p.get<double>(), tick_size);
            }
            const auto size = obj.at("size").get<std::int64_t>();
            std::optional<std::uint64_t> order_id;
            if (obj.contains("order_id") && !obj["order_id"].is_null()) order_id = obj["order_id"].get<std::uint64_t>();
            events.push_back(build_event(ts, action, side, price, size, order_id, line));
        } catch (const json::exception& err) {
            fail(line, std::string("bad field: ") + err.what());
        } catch (const Error& err) {
            if (err.code() == ErrorCode::parse_error && std::string_view(err.what()).starts_with("line ")) throw;
            fail(line, err.what());
        }
    }
    return events;
}

}  // namespace

EventFormat format_for(const std::filesystem::path& path) {
    const auto ext = lower(path.extension().string());
    return (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") ? EventFormat::jsonl : EventFormat::csv;
}

std::optional<Action> parse_action(std::string_view code) noexcept {
    const std::string c = lower(trim(code));
    if (c == "a" || c == "add") return Action::add;
    if (c == "c" || c == "cancel") return Action::cancel;
    if (c == "m" || c == "modify") return Action::modify;
    if (c == "t" || c == "f" || c == "trade" || c == "fill") return Action::trade;
    if (c == "r" || c == "clear" || c == "snapshot-clear") return Action::clear;
    return std::nullopt;
}

std::optional<Side> parse_side(std::string_view code) noexcept {
    const std::string c = lower(trim(code));
    if (c == "b" || c == "bid" || c == "buy") return Side::bid;
    if (c == "a" || c == "ask" || c == "s" || c == "sell") return Side::ask;
    return std::nullopt;
}

char action_code(Action action) noexcept {
    switch (action) {
        case Action::add: return 'A';
        case Action::cancel: return 'C';
        case Action::modify: return 'M';
        case Action::trade: return 'T';
        case Action::clear: return 'R';
    }
    return '?';
}

char side_code(Side side) noexcept { return side == Side::bid ? 'B' : 'A'; }

Ticks price_to_ticks(double price, double tick_size) {
    if (!(tick_size > 0.0)) throw Error(ErrorCode::invalid_argument, "tick_size must be > 0");
    const double ratio = price / tick_size;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-6)
        throw Error(ErrorCode::parse_error, "price " + std::to_string(price) + " is not a multiple of tick " +
                                                std::to_string(tick_size));
    return static_cast<Ticks>(rounded);
}

std::vector<OrderEvent> read_events(std::istream& in, EventFormat format, double tick_size) {
    return format == EventFormat::jsonl ? read_jsonl(in, tick_size) : read_csv(in, tick_size);
}

std::vector<OrderEvent> read_events(const std::filesystem::path& path, double tick_size) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return read_events(in, format_for(path), tick_size);
}

void write_events(std::ostream& out, std::span<const OrderEvent> events) {
    out << "ts_ns,action,side,price_ticks,size,order_id\n";
    for (const auto& e : events) {
        out << e.ts_ns << ',' << action_code(e.action) << ',' << side_code(e.side) << ',' << e.price << ',' << e.size
            << ',';
        if (e.order_id) out << *e.order_id;
        out << '\n';
    }
}

void write_events(const std::filesystem::path& path, std::span<const OrderEvent> events) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    write_events(out, events);
}

std::optional<std::size_t> first_time_regression(std::span<const OrderEvent> events) noexcept {
    for (std::size_t i = 1; i < events.size(); ++i)
        if (events[i].ts_ns < events[i - 1].ts_ns) return i;
    return std::nullopt;
}

}  // namespace microhd

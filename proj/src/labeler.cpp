#include "microhd/labeler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace microhd {

std::string_view to_string(BarKind kind) noexcept {
    switch (kind) {
        case BarKind::tick: return "tick";
        case BarKind::volume: return "volume";
        case BarKind::dollar: return "dollar";
    }
    return "?";
}

BarKind parse_bar_kind(std::string_view text) {
    if (text == "tick") return BarKind::tick;
    if (text == "volume") return BarKind::volume;
    if (text == "dollar") return BarKind::dollar;
    throw Error(ErrorCode::invalid_argument, "unknown bar kind '" + std::string(text) + "'");
}

void BarSpec::validate() const {
    if (!(threshold > 0.0) || !std::isfinite(threshold))
        throw Error(ErrorCode::invalid_argument, "bar threshold must be > 0");
}

BarBuilder::BarBuilder(BarSpec spec, double tick_size) : spec_(spec), tick_size_(tick_size) {
    spec_.validate();
    if (!(tick_size > 0.0)) throw Error(ErrorCode::invalid_argument, "tick_size must be > 0");
}

std::optional<Bar> BarBuilder::push(const TradePrint& p) {
    if (p.size < 0) throw Error(ErrorCode::invalid_argument, "negative print size");
    const std::size_t i = seen_++;
    if (!open_) {
        open_ = Bar{};
        open_->first_print = i;
        stat_ = 0.0;
    }
    Bar& b = *open_;
    b.close_ts = p.ts_ns;
    b.close_price = p.price;
    b.last_print = i;
    b.volume += p.size;
    const double dollars = p.price * tick_size_ * static_cast<double>(p.size);
    b.dollar_value += dollars;
    switch (spec_.kind) {
        case BarKind::tick: stat_ += 1.0; break;
        case BarKind::volume: stat_ += static_cast<double>(p.size); break;
        case BarKind::dollar: stat_ += dollars; break;
    }
    if (stat_ < spec_.threshold) return std::nullopt;
    Bar done = b;
    open_.reset();
    return done;
}

std::optional<Bar> BarBuilder::finish() {
    if (!open_ || !spec_.emit_partial) return std::nullopt;
    Bar b = *open_;
    b.complete = false;
    open_.reset();
    return b;
}

std::vector<Bar> build_bars(std::span<const TradePrint> prints, const BarSpec& spec, double tick_size) {
    BarBuilder builder(spec, tick_size);
    std::vector<Bar> bars;
    for (const auto& p : prints)
        if (auto b = builder.push(p)) bars.push_back(*b);
    if (auto b = builder.finish()) bars.push_back(*b);
    return bars;
}

std::size_t first_bar_after(std::span<const Bar> bars, std::int64_t ts) noexcept {
    const auto it = std::upper_bound(bars.begin(), bars.end(), ts,
                                     [](std::int64_t t, const Bar& b) { return t < b.close_ts; });
    return static_cast<std::size_t>(it - bars.begin());
}

std::int64_t round_half_away(double x) noexcept {
    const double twice = 2.0 * x;
    const double nearest_half = std::round(twice);
    if (std::abs(twice - nearest_half) < 2e-9) x = nearest_half / 2.0;
    return static_cast<std::int64_t>(std::round(x));
}

Label label_ticks(double future_close, double microprice, std::uint32_t n_classes) {
    if (n_classes < 1 || n_classes % 2 == 0) throw Error(ErrorCode::invalid_argument, "class count must be odd");
    const auto half = static_cast<std::int64_t>((n_classes - 1) / 2);
    Label l;
    l.raw_delta = round_half_away(future_close - microprice);
    l.cls = static_cast<std::uint32_t>(std::clamp(l.raw_delta, -half, half) + half);
    return l;
}

Label label(double future_close, double microprice, double tick_size, std::uint32_t n_classes) {
    if (!(tick_size > 0.0)) throw Error(ErrorCode::invalid_argument, "tick_size must be > 0");
    return label_ticks(future_close / tick_size, microprice / tick_size, n_classes);
}

LabeledSample mirrored(const LabeledSample& s, std::uint32_t n_classes) {
    if (s.label >= n_classes) throw Error(ErrorCode::invalid_argument, "class out of range");
    LabeledSample m = s;
    m.features = s.features.mirrored();
    // Prices reflect through the sample's mid.
    const double mid = s.microprice - s.features.g_star;
    m.microprice = 2.0 * mid - s.microprice;
    m.future_close = 2.0 * mid - s.future_close;
    m.raw_delta = -s.raw_delta;
    m.label = n_classes - 1 - s.label;
    return m;
}

// --- dataset files ----------------------------------------------------------------

namespace {

std::string num(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <typename T>
T parse_cell(std::string_view cell, std::size_t line) {
    T v{};
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw Error(ErrorCode::parse_error, "dataset line " + std::to_string(line) + ": bad value '" +
                                                std::string(cell) + "'");
    return v;
}

template <typename T>
void put(std::ostream& out, const T& v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) throw Error(ErrorCode::parse_error, "dataset: truncated binary file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

constexpr char kBinaryMagic[4] = {'M', 'H', 'D', 'S'};
constexpr std::uint32_t kBinaryVersion = 1;

}  // namespace

void write_dataset_csv(std::ostream& out, std::span<const LabeledSample> samples) {
    const std::size_t L = samples.empty() ? 0 : samples.front().features.depth();
    out << "ts_ns";
    for (std::size_t i = 1; i <= L; ++i) out << ",p_ask_" << i;
    for (std::size_t i = 1; i <= L; ++i) out << ",p_bid_" << i;
    out << ",spread,delta_m_half_ticks,g_star,microprice,future_close,future_ts,raw_delta,label\n";
    for (const auto& s : samples) {
        if (s.features.depth() != L) throw Error(ErrorCode::dimension_mismatch, "mixed feature depths in dataset");
        out << s.ts_ns;
        for (double p : s.features.p_ask) out << ',' << num(p);
        for (double p : s.features.p_bid) out << ',' << num(p);
        out << ',' << s.features.spread << ',' << s.features.delta_m.half_ticks << ',' << num(s.features.g_star) << ','
            << num(s.microprice) << ',' << num(s.future_close) << ',' << s.future_ts << ',' << s.raw_delta << ','
            << s.label << '\n';
    }
}

std::vector<LabeledSample> read_dataset_csv(std::istream& in) {
    std::vector<LabeledSample> out;
    std::string row;
    std::size_t line = 0;
    std::size_t L = 0;
    while (std::getline(in, row)) {
        ++line;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view view(row);
        for (std::size_t start = 0;;) {
            const auto comma = view.find(',', start);
            cells.push_back(view.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (line == 1 || cells.front() == "ts_ns") {
            if (cells.size() < 9 || (cells.size() - 9) % 2 != 0)
                throw Error(ErrorCode::parse_error, "dataset header has an unexpected column count");
            L = (cells.size() - 9) / 2;
            continue;
        }
        if (cells.size() != 2 * L + 9)
            throw Error(ErrorCode::parse_error, "dataset line " + std::to_string(line) + ": expected " +
                                                    std::to_string(2 * L + 9) + " fields");
        LabeledSample s;
        std::size_t c = 0;
        s.ts_ns = parse_cell<std::int64_t>(cells[c++], line);
        s.features.p_ask.resize(L);
        s.features.p_bid.resize(L);
        for (auto& p : s.features.p_ask) p = parse_cell<double>(cells[c++], line);
        for (auto& p : s.features.p_bid) p = parse_cell<double>(cells[c++], line);
        s.features.spread = parse_cell<std::int64_t>(cells[c++], line);
        s.features.delta_m.half_ticks = parse_cell<std::int64_t>(cells[c++], line);
        s.features.g_star = parse_cell<double>(cells[c++], line);
        s.microprice = parse_cell<double>(cells[c++], line);
        s.future_close = parse_cell<double>(cells[c++], line);
        s.future_ts = parse_cell<std::int64_t>(cells[c++], line);
        s.raw_delta = parse_cell<std::int64_t>(cells[c++], line);
        s.label = parse_cell<std::uint32_t>(cells[c++], line);
        out.push_back(std::move(s));
    }
    return out;
}

void write_dataset_binary(std::ostream& out, std::span<const LabeledSample> samples) {
    const std::uint32_t L = samples.empty() ? 0 : static_cast<std::uint32_t>(samples.front().features.depth());
    out.write(kBinaryMagic, 4);
    put(out, kBinaryVersion);
    put(out, L);
    put(out, static_cast<std::uint64_t>(samples.size()));
    for (const auto& s : samples) {
        if (s.features.depth() != L) throw Error(ErrorCode::dimension_mismatch, "mixed feature depths in dataset");
        put(out, s.ts_ns);
        for (double p : s.features.p_ask) put(out, p);
        for (double p : s.features.p_bid) put(out, p);
        put(out, s.features.spread);
        put(out, s.features.delta_m.half_ticks);
        put(out, s.features.g_star);
        put(out, s.microprice);
        put(out, s.future_close);
        put(out, s.future_ts);
        put(out, s.raw_delta);
        put(out, s.label);
    }
}

std::vector<LabeledSample> read_dataset_binary(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0)
        throw Error(ErrorCode::parse_error, "not a binary dataset file");
    if (get<std::uint32_t>(in) != kBinaryVersion) throw Error(ErrorCode::parse_error, "unsupported dataset version");
    const auto L = get<std::uint32_t>(in);
    const auto n = get<std::uint64_t>(in);
    std::vector<LabeledSample> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
    for (std::uint64_t k = 0; k < n; ++k) {
        LabeledSample s;
        s.ts_ns = get<std::int64_t>(in);
        s.features.p_ask.resize(L);
        s.features.p_bid.resize(L);
        for (auto& p : s.features.p_ask) p = get<double>(in);
        for (auto& p : s.features.p_bid) p = get<double>(in);
        s.features.spread = get<std::int64_t>(in);
        s.features.delta_m.half_ticks = get<std::int64_t>(in);
        s.features.g_star = get<double>(in);
        s.microprice = get<double>(in);
        s.future_close = get<double>(in);
        s.future_ts = get<std::int64_t>(in);
        s.raw_delta = get<std::int64_t>(in);
        s.label = get<std::uint32_t>(in);
        out.push_back(std::move(s));
    }
    return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const LabeledSample> samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    if (path.extension() == ".bin")
        write_dataset_binary(out, samples);
    else
        write_dataset_csv(out, samples);
}

std::vector<LabeledSample> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return path.extension() == ".bin" ? read_dataset_binary(in) : read_dataset_csv(in);
}

}  // namespace microhd

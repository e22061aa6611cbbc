#pragma once

// Information bars over trade prints and tick-adjustment labels.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "microhd/features.hpp"

namespace microhd {

enum class BarKind : std::uint8_t { tick, volume, dollar };

std::string_view to_string(BarKind kind) noexcept;
BarKind parse_bar_kind(std::string_view text);

struct BarSpec {
    BarKind kind = BarKind::tick;
    double threshold = 2.0;     ///< prints, units, or price units x size
    bool emit_partial = false;  ///< keep a trailing unfinished bar (flagged incomplete)

    void validate() const;
    bool operator==(const BarSpec&) const = default;
};

struct TradePrint {
    std::int64_t ts_ns = 0;
    double price = 0.0;  ///< ticks
    std::int64_t size = 0;
};

struct Bar {
    std::int64_t close_ts = 0;
    double close_price = 0.0;  ///< ticks, last print in the bar
    std::size_t first_print = 0;
    std::size_t last_print = 0;
    std::int64_t volume = 0;
    double dollar_value = 0.0;
    bool complete = true;

    bool operator==(const Bar&) const = default;
};

/// Streaming bar builder. A bar closes on the first print where its running
/// statistic reaches the threshold; the accumulator then restarts from zero.
class BarBuilder {
public:
    BarBuilder(BarSpec spec, double tick_size);

    std::optional<Bar> push(const TradePrint& print);
    /// Trailing partial bar if the spec keeps partials and one is open.
    std::optional<Bar> finish();

    [[nodiscard]] std::size_t prints_seen() const noexcept { return seen_; }

private:
    BarSpec spec_;
    double tick_size_;
    std::size_t seen_ = 0;
    std::optional<Bar> open_;
    double stat_ = 0.0;
};

std::vector<Bar> build_bars(std::span<const TradePrint> prints, const BarSpec& spec, double tick_size);

/// Index of the first bar whose close is strictly after ts, or bars.size().
std::size_t first_bar_after(std::span<const Bar> bars, std::int64_t ts) noexcept;

/// Rounds half away from zero after snapping values within 1e-9 of a half
/// integer, so float noise cannot decide a +-0.5 tick case.
std::int64_t round_half_away(double x) noexcept;

struct Label {
    std::int64_t raw_delta = 0;
    std::uint32_t cls = 2;
};

/// Class = clamp(raw, -h, h) + h with h = (n_classes - 1) / 2; prices in ticks.
Label label_ticks(double future_close, double microprice, std::uint32_t n_classes = 5);
/// Same with prices in price units.
Label label(double future_close, double microprice, double tick_size, std::uint32_t n_classes = 5);

struct LabeledSample {
    std::int64_t ts_ns = 0;
    FeatureVector features;
    double microprice = 0.0;    ///< ticks
    double future_close = 0.0;  ///< ticks
    std::int64_t future_ts = 0;
    std::int64_t raw_delta = 0;
    std::uint32_t label = 2;

    bool operator==(const LabeledSample&) const = default;
};

/// Mirror image of a sample: features mirrored, deltas negated, class reflected about the neutral class.
LabeledSample mirrored(const LabeledSample& s, std::uint32_t n_classes = 5);

void write_dataset_csv(std::ostream& out, std::span<const LabeledSample> samples);
std::vector<LabeledSample> read_dataset_csv(std::istream& in);
void write_dataset_binary(std::ostream& out, std::span<const LabeledSample> samples);
std::vector<LabeledSample> read_dataset_binary(std::istream& in);

/// Format chosen by extension: .bin -> binary, anything else CSV.
void write_dataset(const std::filesystem::path& path, std::span<const LabeledSample> samples);
std::vector<LabeledSample> read_dataset(const std::filesystem::path& path);

}  // namespace microhd

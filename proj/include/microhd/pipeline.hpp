#pragma once

// Training jobs, the per-event update loop, backtesting and reports.
//
// Events that share a timestamp are one book update. Scoring instants are the
// ends of timestamp groups where the top of book differs from the previous
// scoring instant; the truth for instant t is the mid n_future instants later.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "microhd/book.hpp"
#include "microhd/encoder.hpp"
#include "microhd/features.hpp"
#include "microhd/labeler.hpp"
#include "microhd/microprice.hpp"
#include "microhd/tsetlin.hpp"

namespace microhd {

enum class PriceSource : std::uint8_t { mid, trade };
std::string_view to_string(PriceSource s) noexcept;
PriceSource parse_price_source(std::string_view text);

struct PipelineConfig {
    BookConfig book{};
    std::size_t n_imbalance = 11;
    Ticks max_spread = 10;
    int k_max = 2;
    double epsilon = 1e-8;
    int max_iters = 200;
    EncoderConfig encoder{};
    TMConfig tm{};
    BarSpec bars{};
    PriceSource label_price = PriceSource::mid;  ///< price attached to each trade print
    bool sample_at_bars = true;                  ///< training samples at bar closes, else at every top change
    PriceSource truth = PriceSource::mid;
    std::size_t n_future = 8;
    double train_fraction = 0.5;
    std::size_t tm_max_samples = 4000;
    std::uint64_t sample_seed = 5;
    bool tm_mirror = true;                       ///< also train on the mirror image of every sample
    double tm_validation = 0.2;                  ///< trailing share of samples held out to pick the epoch; 0 keeps the last

    PipelineConfig();
    /// Copies shared fields into the sub-configs (depth, TM input width).
    void sync();
    void validate() const;
    [[nodiscard]] StateGrid grid() const { return StateGrid(n_imbalance, max_spread); }
    [[nodiscard]] MicropriceOptions microprice_options() const;

    bool operator==(const PipelineConfig&) const = default;
};

/// Config keys, in file order. Every key is also a CLI flag.
const std::vector<std::string>& config_keys();
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& cfg, const std::string& key);
/// key = value lines; '#' starts a comment.
void read_config(std::istream& in, PipelineConfig& cfg);
void read_config(const std::filesystem::path& path, PipelineConfig& cfg);
void write_config(std::ostream& out, const PipelineConfig& cfg);

// --- per-event update -------------------------------------------------------

struct UpdateCounters {
    std::uint64_t events = 0;
    std::uint64_t evaluations = 0;
    std::uint64_t degenerate = 0;     ///< one-sided or empty book: plain microprice passed through
    std::uint64_t grid_clamped = 0;   ///< spreads outside the microprice grid
    std::uint64_t vocab_clamped = 0;  ///< tick symbols outside the encoder vocabulary
};

struct UpdateResult {
    bool valid = false;        ///< false for a degenerate book
    double plain = 0.0;        ///< microprice, ticks
    double adjusted = 0.0;     ///< ticks
    std::uint32_t cls = 2;
};

class Pipeline {
public:
    Pipeline(PipelineConfig config, MicropriceTable table, TsetlinMachine tm);

    /// Applies the event, refreshes the microprice if the top changed, then
    /// features -> encoding -> TM class -> adjusted price.
    UpdateResult run_update(const OrderEvent& e);

    /// Book update and microprice refresh only.
    ApplyResult apply(const OrderEvent& e);
    /// Feature, encoding and prediction steps on the current book.
    UpdateResult evaluate();

    [[nodiscard]] const BookState& book() const noexcept { return book_; }
    [[nodiscard]] const FeatureVector& features() const noexcept { return features_; }
    [[nodiscard]] const UpdateCounters& counters() const noexcept { return counters_; }
    [[nodiscard]] const PipelineConfig& config() const noexcept { return config_; }
    [[nodiscard]] const MicropriceTable& table() const noexcept { return table_; }
    [[nodiscard]] const TsetlinMachine& tm() const noexcept { return tm_; }
    [[nodiscard]] const Encoder& encoder() const noexcept { return encoder_; }

private:
    void refresh_microprice();

    PipelineConfig config_;
    MicropriceTable table_;
    TsetlinMachine tm_;
    Encoder encoder_;
    BookState book_;
    double micro_ = 0.0;
    double micro_adjustment_ = 0.0;
    bool micro_valid_ = false;
    UpdateCounters counters_;
    FeatureVector features_;
    SparseHypervector hv_;
    BitVector bits_;
    std::vector<std::int64_t> scores_;
};

// --- jobs -------------------------------------------------------------------

/// First index of the timestamp group containing event floor(n * fraction).
std::size_t split_index(std::span<const OrderEvent> events, double fraction);

MicropriceTable train_microprice_job(std::span<const OrderEvent> events, const PipelineConfig& cfg,
                                     CollectStats* stats = nullptr);

struct LabelStats {
    std::uint64_t prints = 0;
    std::uint64_t bars = 0;
    std::uint64_t candidates = 0;
    std::uint64_t samples = 0;
    std::uint64_t skipped_no_future = 0;
    std::uint64_t lookahead_violations = 0;
    std::vector<std::uint64_t> class_histogram;
};

/// Replays all events, takes samples inside [begin, end) and labels them with
/// bars built from prints inside [begin, end) only.
std::vector<LabeledSample> make_labels(std::span<const OrderEvent> events, const PipelineConfig& cfg,
                                       const MicropriceTable& table, std::size_t begin, std::size_t end,
                                       LabelStats* stats = nullptr);
inline std::vector<LabeledSample> make_labels(std::span<const OrderEvent> events, const PipelineConfig& cfg,
                                              const MicropriceTable& table, LabelStats* stats = nullptr) {
    return make_labels(events, cfg, table, 0, events.size(), stats);
}

/// Up to tm_max_samples samples (seeded selection), encoded and trained. With
/// tm_validation > 0 the trailing samples are held out and the epoch snapshot
/// (the untrained pool included) with the lowest squared adjustment error on
/// them is returned.
TsetlinMachine train_tm_job(std::span<const LabeledSample> samples, const PipelineConfig& cfg,
                            TrainReport* report = nullptr);

std::vector<BitVector> encode_samples(std::span<const LabeledSample> samples, const Encoder& encoder);

// --- evaluation -------------------------------------------------------------

/// sqrt(mean over t of (pred[t] - truth[t + N])^2), t = 0 .. n - N - 1.
double evaluate_l2(std::span<const double> predictions, std::span<const double> truths, std::size_t n_future);

enum class ClassSource : std::uint8_t { tm, oracle, playback };
std::string_view to_string(ClassSource s) noexcept;

struct BacktestOptions {
    std::size_t start = 0;  ///< first event index eligible for scoring
    ClassSource source = ClassSource::tm;
    std::vector<std::uint32_t> playback;  ///< per-instant classes for ClassSource::playback
    bool measure_latency = false;
};

struct BacktestSeries {
    std::vector<std::int64_t> ts;
    std::vector<double> plain;     ///< ticks
    std::vector<double> adjusted;  ///< ticks
    std::vector<double> truth;     ///< ticks (mid or last trade)
    std::vector<std::uint32_t> cls;
};

struct BacktestReport {
    std::string class_source = "tm";
    std::uint64_t events = 0;
    std::uint64_t instants = 0;
    std::uint64_t scored = 0;  ///< instants with a truth n_future ahead
    std::size_t n_future = 0;
    double tick_size = 0.0;
    double l2_plain_ticks = 0.0;
    double l2_adjusted_ticks = 0.0;
    double l2_mid_ticks = 0.0;  ///< the mid itself as predictor
    double l2_plain = 0.0;      ///< price units
    double l2_adjusted = 0.0;
    double improvement_pct = 0.0;
    std::vector<std::vector<std::uint64_t>> confusion;  ///< [oracle class][predicted class]
    std::vector<std::uint64_t> predicted_histogram;
    double mean_spread_ticks = 0.0;
    double realized_vol = 0.0;  ///< std of log mid returns between instants
    UpdateCounters counters;
    BookCounters book;
    std::map<std::string, std::string> stamp;  ///< seeds and key settings
};

struct TimingReport {
    std::uint64_t samples = 0;
    double p50_ns = 0.0;
    double p90_ns = 0.0;
    double p99_ns = 0.0;
    double max_ns = 0.0;
    double mean_ns = 0.0;
};

BacktestReport backtest(std::span<const OrderEvent> events, const PipelineConfig& cfg, const MicropriceTable& table,
                        const TsetlinMachine& tm, const BacktestOptions& options = {},
                        BacktestSeries* series = nullptr, TimingReport* timing = nullptr);

/// Latency of the update hot path (features, encoding, inference) over a replay.
TimingReport bench_update(std::span<const OrderEvent> events, const PipelineConfig& cfg, const MicropriceTable& table,
                          const TsetlinMachine& tm, std::size_t max_samples = 20000);

void write_report_text(std::ostream& out, const BacktestReport& r);
void write_report_jsonl(std::ostream& out, const BacktestReport& r);
void write_timing_text(std::ostream& out, const TimingReport& t);
void write_timing_jsonl(std::ostream& out, const TimingReport& t);
void write_train_report_text(std::ostream& out, const TrainReport& r);
void write_train_report_jsonl(std::ostream& out, const TrainReport& r);
void write_microprice_report_text(std::ostream& out, const MicropriceTable& t);
void write_microprice_report_jsonl(std::ostream& out, const MicropriceTable& t);

// --- end to end -------------------------------------------------------------

struct ExperimentResult {
    std::size_t split = 0;
    MicropriceTable table;
    TsetlinMachine tm;
    CollectStats collect;
    LabelStats labels;
    TrainReport train;
    BacktestReport report;
    TimingReport timing;
};

/// Trains on events before the split and backtests on the rest.
ExperimentResult run_experiment(std::span<const OrderEvent> events, const PipelineConfig& cfg,
                                bool measure_latency = false);

}  // namespace microhd

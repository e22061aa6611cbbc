#include "microhd/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace microhd {

std::string_view to_string(PriceSource s) noexcept { return s == PriceSource::mid ? "mid" : "trade"; }

PriceSource parse_price_source(std::string_view text) {
    if (text == "mid") return PriceSource::mid;
    if (text == "trade" || text == "last") return PriceSource::trade;
    throw Error(ErrorCode::invalid_argument, "price source must be mid or trade, got '" + std::string(text) + "'");
}

std::string_view to_string(ClassSource s) noexcept {
    switch (s) {
        case ClassSource::tm: return "tm";
        case ClassSource::oracle: return "oracle";
        case ClassSource::playback: return "playback";
    }
    return "?";
}

// --- config -----------------------------------------------------------------

PipelineConfig::PipelineConfig() {
    tm.epochs = 20;  // the held-out snapshot choice rarely lands later than this
    tm.threshold = 256;
    bars.threshold = 4.0;
    sync();
}

void PipelineConfig::sync() {
    encoder.depth = book.depth_limit;
    tm.n_features = static_cast<std::uint32_t>(encoder.shape.dimension());
}

void PipelineConfig::validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, m); };
    if (book.depth_limit == 0) bad("depth must be >= 1");
    if (!(book.tick_size > 0.0)) bad("tick_size must be > 0");
    (void)grid();
    if (k_max < 1) bad("k_max must be >= 1");
    if (!(epsilon > 0.0)) bad("epsilon must be > 0");
    if (max_iters < 1) bad("max_iters must be >= 1");
    if (encoder.depth != book.depth_limit) bad("encoder depth differs from book depth");
    if (encoder.q_levels < 1) bad("q_levels must be >= 1");
    if (encoder.tick_vocab_range < 1) bad("tick_vocab_range must be >= 1");
    if (encoder.shape.n_segments == 0 || encoder.shape.segment_len < 2 || encoder.shape.segment_len >= 0xFFFF)
        bad("bad hypervector shape");
    tm.validate();
    if (tm.n_features != encoder.shape.dimension())
        throw Error(ErrorCode::dimension_mismatch, "TM input width differs from hypervector dimension");
    if (tm.n_classes < 3 || tm.n_classes % 2 == 0) bad("n_classes must be odd and >= 3");
    bars.validate();
    if (n_future < 1) bad("n_future must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) bad("train_fraction must lie in (0, 1)");
    if (!(tm_validation >= 0.0 && tm_validation < 1.0)) bad("tm_validation must lie in [0, 1)");
    if (tm_max_samples < 1) bad("tm_max_samples must be >= 1");
}

MicropriceOptions PipelineConfig::microprice_options() const {
    MicropriceOptions o;
    o.grid = grid();
    o.k_max = k_max;
    o.epsilon = epsilon;
    o.max_iters = max_iters;
    return o;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
    T v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw Error(ErrorCode::invalid_argument, "bad value '" + text + "' for " + key);
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw Error(ErrorCode::invalid_argument, "bad boolean '" + text + "' for " + key);
}

struct KeySpec {
    std::string name;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

template <typename T, typename Member>
KeySpec number_key(std::string name, Member member) {
    return {std::move(name),
            [member](const PipelineConfig& c) {
                if constexpr (std::is_floating_point_v<T>) return fmt_double(std::invoke(member, c));
                else return std::to_string(std::invoke(member, c));
            },
            [member](PipelineConfig& c, const std::string& k, const std::string& v) {
                std::invoke(member, c) = parse_value<T>(k, v);
            }};
}

#define MHD_KEY(type, name, expr) \
    number_key<type>(name, [](auto& c) -> auto& { return c.expr; })

const std::vector<KeySpec>& key_specs() {
    static const std::vector<KeySpec> specs = [] {
        std::vector<KeySpec> s;
        s.push_back(MHD_KEY(double, "tick_size", book.tick_size));
        s.push_back(MHD_KEY(std::size_t, "depth", book.depth_limit));
        s.push_back({"mode",
                     [](const PipelineConfig& c) { return std::string(c.book.mode == IngestMode::strict ? "strict" : "lenient"); },
                     [](PipelineConfig& c, const std::string& k, const std::string& v) {
                         if (v == "strict") c.book.mode = IngestMode::strict;
                         else if (v == "lenient") c.book.mode = IngestMode::lenient;
                         else throw Error(ErrorCode::invalid_argument, "bad value '" + v + "' for " + k);
                     }});
        s.push_back(MHD_KEY(std::size_t, "n_imbalance", n_imbalance));
        s.push_back(MHD_KEY(Ticks, "max_spread", max_spread));
        s.push_back(MHD_KEY(int, "k_max", k_max));
        s.push_back(MHD_KEY(double, "epsilon", epsilon));
        s.push_back(MHD_KEY(int, "max_iters", max_iters));
        s.push_back(MHD_KEY(std::uint32_t, "q_levels", encoder.q_levels));
        s.push_back(MHD_KEY(std::int64_t, "tick_vocab_range", encoder.tick_vocab_range));
        s.push_back(MHD_KEY(std::uint32_t, "n_segments", encoder.shape.n_segments));
        s.push_back(MHD_KEY(std::uint32_t, "segment_len", encoder.shape.segment_len));
        s.push_back(MHD_KEY(std::uint64_t, "codebook_seed", encoder.codebook_seed));
        s.push_back(MHD_KEY(std::uint64_t, "rank_seed", encoder.rank_seed));
        s.push_back(MHD_KEY(std::uint64_t, "tie_seed", encoder.tie_seed));
        s.push_back(MHD_KEY(std::uint32_t, "n_clauses", tm.n_clauses));
        s.push_back(MHD_KEY(std::uint32_t, "n_classes", tm.n_classes));
        s.push_back(MHD_KEY(std::int32_t, "threshold", tm.threshold));
        s.push_back(MHD_KEY(double, "specificity", tm.specificity));
        s.push_back(MHD_KEY(std::uint32_t, "max_literals", tm.max_literals));
        s.push_back(MHD_KEY(std::uint32_t, "ta_states", tm.ta_states));
        s.push_back(MHD_KEY(std::uint32_t, "epochs", tm.epochs));
        s.push_back(MHD_KEY(std::uint64_t, "tm_seed", tm.seed));
        s.push_back({"bar_kind", [](const PipelineConfig& c) { return std::string(to_string(c.bars.kind)); },
                     [](PipelineConfig& c, const std::string&, const std::string& v) { c.bars.kind = parse_bar_kind(v); }});
        s.push_back(MHD_KEY(double, "bar_threshold", bars.threshold));
        s.push_back({"emit_partial", [](const PipelineConfig& c) { return std::string(c.bars.emit_partial ? "true" : "false"); },
                     [](PipelineConfig& c, const std::string& k, const std::string& v) { c.bars.emit_partial = parse_bool(k, v); }});
        s.push_back({"label_price", [](const PipelineConfig& c) { return std::string(to_string(c.label_price)); },
                     [](PipelineConfig& c, const std::string&, const std::string& v) { c.label_price = parse_price_source(v); }});
        s.push_back({"label_sampling", [](const PipelineConfig& c) { return std::string(c.sample_at_bars ? "bar" : "book"); },
                     [](PipelineConfig& c, const std::string& k, const std::string& v) {
                         if (v == "bar") c.sample_at_bars = true;
                         else if (v == "book") c.sample_at_bars = false;
                         else throw Error(ErrorCode::invalid_argument, "bad value '" + v + "' for " + k);
                     }});
        s.push_back({"truth", [](const PipelineConfig& c) { return std::string(to_string(c.truth)); },
                     [](PipelineConfig& c, const std::string&, const std::string& v) { c.truth = parse_price_source(v); }});
        s.push_back(MHD_KEY(std::size_t, "n_future", n_future));
        s.push_back(MHD_KEY(double, "train_fraction", train_fraction));
        s.push_back(MHD_KEY(std::size_t, "tm_max_samples", tm_max_samples));
        s.push_back(MHD_KEY(std::uint64_t, "sample_seed", sample_seed));
        s.push_back(MHD_KEY(double, "tm_validation", tm_validation));
        s.push_back({"tm_mirror", [](const PipelineConfig& c) { return std::string(c.tm_mirror ? "true" : "false"); },
                     [](PipelineConfig& c, const std::string& k, const std::string& v) { c.tm_mirror = parse_bool(k, v); }});
        return s;
    }();
    return specs;
}

#undef MHD_KEY

const KeySpec& find_key(const std::string& key) {
    for (const auto& s : key_specs())
        if (s.name == key) return s;
    throw Error(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& s : key_specs()) k.push_back(s.name);
        return k;
    }();
    return keys;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    find_key(key).set(cfg, key, value);
    cfg.sync();
}

std::string get_config_value(const PipelineConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

void read_config(std::istream& in, PipelineConfig& cfg) {
    std::string row;
    std::size_t line = 0;
    while (std::getline(in, row)) {
        ++line;
        if (const auto hash = row.find('#'); hash != std::string::npos) row.resize(hash);
        row = trim(row);
        if (row.empty()) continue;
        const auto eq = row.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": expected key = value");
        try {
            set_config_value(cfg, trim(row.substr(0, eq)), trim(row.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + e.what());
        }
    }
}

void read_config(const std::filesystem::path& path, PipelineConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    read_config(in, cfg);
}

void write_config(std::ostream& out, const PipelineConfig& cfg) {
    for (const auto& s : key_specs()) out << s.name << " = " << s.get(cfg) << '\n';
}

// --- per-event update -------------------------------------------------------

Pipeline::Pipeline(PipelineConfig config, MicropriceTable table, TsetlinMachine tm)
    : config_(std::move(config)),
      table_(std::move(table)),
      tm_(std::move(tm)),
      encoder_(config_.encoder),
      book_(config_.book),
      hv_(config_.encoder.shape),
      bits_(config_.encoder.shape.dimension()) {
    config_.validate();
    if (!table_.trained()) throw Error(ErrorCode::untrained_model, "microprice table is not trained");
    if (tm_.config().n_features != config_.encoder.shape.dimension())
        throw Error(ErrorCode::dimension_mismatch, "TM input width differs from hypervector dimension");
    if (tm_.config().n_classes != config_.tm.n_classes)
        throw Error(ErrorCode::dimension_mismatch, "TM class count differs from config");
}

void Pipeline::refresh_microprice() {
    const auto mid = mid_price(book_);
    if (!mid) {
        micro_valid_ = false;
        return;
    }
    micro_adjustment_ = microprice_adjustment_ticks(book_, table_, &counters_.grid_clamped);
    micro_ = mid->ticks() + micro_adjustment_;
    micro_valid_ = true;
}

ApplyResult Pipeline::apply(const OrderEvent& e) {
    ++counters_.events;
    ApplyResult r = book_.apply(e);
    if (r.top_changed) refresh_microprice();
    return r;
}

UpdateResult Pipeline::evaluate() {
    ++counters_.evaluations;
    const auto neutral = (config_.tm.n_classes - 1) / 2;
    if (!micro_valid_ || !book_.two_sided()) {
        ++counters_.degenerate;
        return {false, micro_, micro_, neutral};
    }
    features_ = assemble_feature_vector(book_, micro_adjustment_);
    EncodeStats stats;
    encoder_.encode_into(features_, hv_, &stats);
    counters_.vocab_clamped += stats.clamped;
    to_literal_array(hv_, bits_);
    const std::uint32_t cls = tm_.predict(bits_, scores_);
    return {true, micro_, micro_ + static_cast<double>(static_cast<std::int64_t>(cls) - static_cast<std::int64_t>(neutral)),
            cls};
}

UpdateResult Pipeline::run_update(const OrderEvent& e) {
    apply(e);
    return evaluate();
}

// --- jobs -------------------------------------------------------------------

std::size_t split_index(std::span<const OrderEvent> events, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorCode::invalid_argument, "fraction must lie in [0, 1]");
    auto i = static_cast<std::size_t>(std::floor(static_cast<double>(events.size()) * fraction));
    i = std::min(i, events.size());
    while (i > 0 && i < events.size() && events[i - 1].ts_ns == events[i].ts_ns) --i;
    return i;
}

MicropriceTable train_microprice_job(std::span<const OrderEvent> events, const PipelineConfig& cfg,
                                     CollectStats* stats) {
    cfg.validate();
    const auto obs = collect_observations(events, cfg.k_max, cfg.book, 1, stats);
    return train_microprice(obs, cfg.microprice_options());
}

std::vector<LabeledSample> make_labels(std::span<const OrderEvent> events, const PipelineConfig& cfg,
                                       const MicropriceTable& table, std::size_t begin, std::size_t end,
                                       LabelStats* stats_out) {
    cfg.validate();
    if (begin > end || end > events.size()) throw Error(ErrorCode::invalid_argument, "bad label range");
    LabelStats stats;
    stats.class_histogram.assign(cfg.tm.n_classes, 0);

    struct Candidate {
        std::int64_t ts;
        FeatureVector features;
        double micro;
    };
    std::vector<Candidate> candidates;
    std::vector<Bar> bars;
    BarBuilder builder(cfg.bars, cfg.book.tick_size);
    BookState book(cfg.book);
    std::optional<TopOfBook> last_top;
    std::int64_t consumed_ts = std::numeric_limits<std::int64_t>::min();
    std::vector<const OrderEvent*> trades;

    std::size_t i = 0;
    while (i < end) {
        const std::int64_t ts = events[i].ts_ns;
        std::size_t j = i;
        trades.clear();
        while (j < end && events[j].ts_ns == ts) {
            const auto r = book.apply(events[j]);
            consumed_ts = std::max(consumed_ts, events[j].ts_ns);
            if (events[j].action == Action::trade && r.status == ApplyStatus::applied) trades.push_back(&events[j]);
            ++j;
        }
        const auto top = top_of_book(book);
        const bool top_changed = top != last_top;
        last_top = top;
        if (i >= begin) {
            bool bar_closed = false;
            const auto mid = mid_price(book);
            for (const OrderEvent* t : trades) {
                ++stats.prints;
                TradePrint p{t->ts_ns, static_cast<double>(t->price), t->size};
                if (cfg.label_price == PriceSource::mid && mid) p.price = mid->ticks();
                if (auto bar = builder.push(p)) {
                    bars.push_back(*bar);
                    bar_closed = true;
                }
            }
            const bool sample = cfg.sample_at_bars ? bar_closed : top_changed;
            if (sample && top) {
                ++stats.candidates;
                // Features may only see events at or before the sample time.
                if (consumed_ts > ts || (j < events.size() && events[j].ts_ns <= ts)) ++stats.lookahead_violations;
                const double adj = microprice_adjustment_ticks(book, table);
                candidates.push_back({ts, assemble_feature_vector(book, adj), mid->ticks() + adj});
            }
        }
        i = j;
    }
    if (auto bar = builder.finish()) bars.push_back(*bar);
    stats.bars = bars.size();

    std::vector<LabeledSample> samples;
    samples.reserve(candidates.size());
    for (auto& c : candidates) {
        const std::size_t k = first_bar_after(bars, c.ts);
        if (k == bars.size()) {
            ++stats.skipped_no_future;
            continue;
        }
        const Bar& bar = bars[k];
        if (bar.close_ts <= c.ts) ++stats.lookahead_violations;
        const Label l = label_ticks(bar.close_price, c.micro, cfg.tm.n_classes);
        LabeledSample s;
        s.ts_ns = c.ts;
        s.features = std::move(c.features);
        s.microprice = c.micro;
        s.future_close = bar.close_price;
        s.future_ts = bar.close_ts;
        s.raw_delta = l.raw_delta;
        s.label = l.cls;
        ++stats.class_histogram[l.cls];
        samples.push_back(std::move(s));
    }
    stats.samples = samples.size();
    if (stats_out) *stats_out = stats;
    return samples;
}

std::vector<BitVector> encode_samples(std::span<const LabeledSample> samples, const Encoder& encoder) {
    std::vector<BitVector> out;
    out.reserve(samples.size());
    SparseHypervector hv(encoder.shape());
    for (const auto& s : samples) {
        encoder.encode_into(s.features, hv);
        out.push_back(to_literal_array(hv));
    }
    return out;
}

TsetlinMachine train_tm_job(std::span<const LabeledSample> samples, const PipelineConfig& cfg, TrainReport* report) {
    cfg.validate();
    if (samples.empty()) throw Error(ErrorCode::insufficient_data, "no labeled samples to train on");
    std::vector<std::size_t> pick(samples.size());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    if (pick.size() > cfg.tm_max_samples) {
        Rng rng(mix_seed(cfg.sample_seed, 0x5a3));
        for (std::size_t i = 0; i < cfg.tm_max_samples; ++i)
            std::swap(pick[i], pick[i + uniform_below(rng, pick.size() - i)]);
        pick.resize(cfg.tm_max_samples);
        std::sort(pick.begin(), pick.end());
    }
    // Chronological cut: the held-out tail sits after every training sample.
    auto n_hold = static_cast<std::size_t>(cfg.tm_validation * static_cast<double>(pick.size()));
    if (n_hold >= pick.size()) n_hold = 0;
    std::vector<LabeledSample> chosen, held;
    for (std::size_t k = 0; k < pick.size(); ++k)
        (k + n_hold < pick.size() ? chosen : held).push_back(samples[pick[k]]);
    if (cfg.tm_mirror) {
        for (auto* v : {&chosen, &held}) {
            const std::size_t n = v->size();
            for (std::size_t i = 0; i < n; ++i) v->push_back(mirrored((*v)[i], cfg.tm.n_classes));
        }
    }
    const Encoder encoder(cfg.encoder);
    const auto xs = encode_samples(chosen, encoder);
    std::vector<std::uint32_t> labels;
    labels.reserve(chosen.size());
    for (const auto& s : chosen) labels.push_back(s.label);
    TsetlinMachine tm(cfg.tm);
    if (held.empty()) {
        auto r = tm.train(xs, labels, cfg.tm.epochs);
        if (report) *report = std::move(r);
        return tm;
    }

    const auto hx = encode_samples(held, encoder);
    const double h = static_cast<double>(cfg.tm.n_classes / 2);
    auto score = [&](const TsetlinMachine& m) {
        double sum = 0.0;
        for (std::size_t i = 0; i < held.size(); ++i) {
            const double e = (static_cast<double>(m.predict(hx[i])) - h) - (held[i].future_close - held[i].microprice);
            sum += e * e;
        }
        return sum / static_cast<double>(held.size());
    };
    std::vector<double> scores{score(tm)};
    TsetlinMachine best = tm;
    std::uint32_t best_epoch = 0;
    auto r = tm.train(xs, labels, cfg.tm.epochs, 2.0, [&](std::uint32_t epoch, const TsetlinMachine& m) {
        scores.push_back(score(m));
        if (scores.back() < scores[best_epoch]) {
            best = m;
            best_epoch = epoch;
        }
        return true;
    });
    r.validation_score = std::move(scores);
    r.selected_epoch = best_epoch;
    r.literal_histogram = best.literal_histogram();
    r.max_included = 0;
    for (std::size_t k = 0; k < r.literal_histogram.size(); ++k)
        if (r.literal_histogram[k]) r.max_included = static_cast<std::uint32_t>(k);
    if (report) *report = std::move(r);
    return best;
}

// --- evaluation -------------------------------------------------------------

double evaluate_l2(std::span<const double> predictions, std::span<const double> truths, std::size_t n_future) {
    if (predictions.size() != truths.size())
        throw Error(ErrorCode::dimension_mismatch, "prediction and truth series differ in length");
    if (n_future < 1) throw Error(ErrorCode::invalid_argument, "n_future must be >= 1");
    if (predictions.size() <= n_future) throw Error(ErrorCode::insufficient_data, "empty evaluation window");
    const std::size_t T = predictions.size() - n_future;
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double e = predictions[t] - truths[t + n_future];
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(T));
}

namespace {

TimingReport summarize(std::vector<double> ns) {
    TimingReport t;
    t.samples = ns.size();
    if (ns.empty()) return t;
    std::sort(ns.begin(), ns.end());
    auto pct = [&](double q) {
        const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ns.size()))) ;
        return ns[std::min(ns.size() - 1, k == 0 ? 0 : k - 1)];
    };
    t.p50_ns = pct(0.50);
    t.p90_ns = pct(0.90);
    t.p99_ns = pct(0.99);
    t.max_ns = ns.back();
    t.mean_ns = std::accumulate(ns.begin(), ns.end(), 0.0) / static_cast<double>(ns.size());
    return t;
}

double elapsed_ns(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
    return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

}  // namespace

BacktestReport backtest(std::span<const OrderEvent> events, const PipelineConfig& cfg, const MicropriceTable& table,
                        const TsetlinMachine& tm, const BacktestOptions& options, BacktestSeries* series_out,
                        TimingReport* timing) {
    Pipeline p(cfg, table, tm);
    BacktestSeries s;
    std::vector<double> mids;
    std::vector<Ticks> spreads;
    std::vector<double> latencies;
    std::optional<TopOfBook> last_scored;

    std::size_t i = 0;
    while (i < events.size()) {
        const std::int64_t ts = events[i].ts_ns;
        const std::size_t group_start = i;
        while (i < events.size() && events[i].ts_ns == ts) p.apply(events[i++]);
        if (group_start < options.start) continue;
        const auto top = top_of_book(p.book());
        if (!top || top == last_scored) continue;
        last_scored = top;
        UpdateResult r;
        if (options.measure_latency) {
            const auto t0 = std::chrono::steady_clock::now();
            r = p.evaluate();
            latencies.push_back(elapsed_ns(t0, std::chrono::steady_clock::now()));
        } else {
            r = p.evaluate();
        }
        const double mid = mid_price(p.book())->ticks();
        const auto& last = p.book().last_trade_price();
        s.ts.push_back(ts);
        s.plain.push_back(r.plain);
        s.cls.push_back(r.cls);
        s.truth.push_back(cfg.truth == PriceSource::trade && last ? static_cast<double>(*last) : mid);
        mids.push_back(mid);
        spreads.push_back(top->ask_price - top->bid_price);
    }

    const std::size_t n = s.plain.size();
    const std::size_t N = cfg.n_future;
    const std::uint32_t C = cfg.tm.n_classes;
    const auto h = static_cast<std::int64_t>((C - 1) / 2);

    std::vector<std::uint32_t> oracle(n, static_cast<std::uint32_t>(h));
    for (std::size_t t = 0; t + N < n; ++t) oracle[t] = label_ticks(s.truth[t + N], s.plain[t], C).cls;
    if (options.source == ClassSource::oracle) {
        s.cls = oracle;
    } else if (options.source == ClassSource::playback) {
        if (options.playback.size() < n)
            throw Error(ErrorCode::dimension_mismatch, "playback holds " + std::to_string(options.playback.size()) +
                                                           " classes for " + std::to_string(n) + " instants");
        s.cls.assign(options.playback.begin(), options.playback.begin() + static_cast<std::ptrdiff_t>(n));
        for (auto c : s.cls)
            if (c >= C) throw Error(ErrorCode::invalid_argument, "playback class out of range");
    }
    s.adjusted.resize(n);
    for (std::size_t t = 0; t < n; ++t) s.adjusted[t] = s.plain[t] + static_cast<double>(static_cast<std::int64_t>(s.cls[t]) - h);

    BacktestReport r;
    r.class_source = std::string(to_string(options.source));
    r.events = events.size() - std::min(options.start, events.size());
    r.instants = n;
    r.n_future = N;
    r.tick_size = cfg.book.tick_size;
    r.l2_plain_ticks = evaluate_l2(s.plain, s.truth, N);
    r.l2_adjusted_ticks = evaluate_l2(s.adjusted, s.truth, N);
    r.l2_mid_ticks = evaluate_l2(mids, s.truth, N);
    r.scored = n - N;
    r.l2_plain = r.l2_plain_ticks * cfg.book.tick_size;
    r.l2_adjusted = r.l2_adjusted_ticks * cfg.book.tick_size;
    r.improvement_pct = r.l2_plain_ticks > 0.0 ? 100.0 * (1.0 - r.l2_adjusted_ticks / r.l2_plain_ticks) : 0.0;
    r.confusion.assign(C, std::vector<std::uint64_t>(C, 0));
    r.predicted_histogram.assign(C, 0);
    for (std::size_t t = 0; t < r.scored; ++t) {
        ++r.confusion[oracle[t]][s.cls[t]];
        ++r.predicted_histogram[s.cls[t]];
    }
    r.mean_spread_ticks = n ? static_cast<double>(std::accumulate(spreads.begin(), spreads.end(), Ticks{0})) /
                                  static_cast<double>(n)
                            : 0.0;
    if (n > 2) {
        std::vector<double> ret;
        ret.reserve(n - 1);
        for (std::size_t t = 1; t < n; ++t) ret.push_back(std::log(mids[t] / mids[t - 1]));
        const double mean = std::accumulate(ret.begin(), ret.end(), 0.0) / static_cast<double>(ret.size());
        double ss = 0.0;
        for (double x : ret) ss += (x - mean) * (x - mean);
        r.realized_vol = std::sqrt(ss / static_cast<double>(ret.size() - 1));
    }
    r.counters = p.counters();
    r.book = p.book().counters();
    for (const auto& key : config_keys()) r.stamp[key] = get_config_value(cfg, key);

    if (timing) *timing = summarize(std::move(latencies));
    if (series_out) *series_out = std::move(s);
    return r;
}

TimingReport bench_update(std::span<const OrderEvent> events, const PipelineConfig& cfg, const MicropriceTable& table,
                          const TsetlinMachine& tm, std::size_t max_samples) {
    Pipeline p(cfg, table, tm);
    std::vector<double> ns;
    ns.reserve(std::min(max_samples, events.size()));
    for (const auto& e : events) {
        p.apply(e);
        if (!p.book().two_sided()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = p.evaluate();
        ns.push_back(elapsed_ns(t0, std::chrono::steady_clock::now()));
        (void)r;
        if (ns.size() >= max_samples) break;
    }
    return summarize(std::move(ns));
}

// --- reports ----------------------------------------------------------------

namespace {

constexpr int kReportVersion = 1;

nlohmann::ordered_json counters_json(const UpdateCounters& c, const BookCounters& b) {
    return {{"events", c.events},          {"evaluations", c.evaluations},   {"degenerate", c.degenerate},
            {"grid_clamped", c.grid_clamped}, {"vocab_clamped", c.vocab_clamped}, {"applied", b.applied},
            {"ignored", b.ignored},        {"rejected", b.rejected},         {"crossing_fills", b.crossing_fills}};
}

}  // namespace

void write_report_text(std::ostream& out, const BacktestReport& r) {
    out << "backtest report v" << kReportVersion << " (classes: " << r.class_source << ")\n";
    out << "events            " << r.events << '\n';
    out << "scoring instants  " << r.instants << " (scored " << r.scored << ", N = " << r.n_future << ")\n";
    out << "L2 plain          " << fmt_double(r.l2_plain) << " (" << fmt_double(r.l2_plain_ticks) << " ticks)\n";
    out << "L2 adjusted       " << fmt_double(r.l2_adjusted) << " (" << fmt_double(r.l2_adjusted_ticks) << " ticks)\n";
    out << "L2 mid            " << fmt_double(r.l2_mid_ticks * r.tick_size) << " (" << fmt_double(r.l2_mid_ticks)
        << " ticks)\n";
    out << "improvement       " << fmt_double(r.improvement_pct) << " %\n";
    out << "mean spread       " << fmt_double(r.mean_spread_ticks) << " ticks\n";
    out << "realized vol      " << fmt_double(r.realized_vol) << " (std of log mid returns per instant)\n";
    out << "confusion (rows oracle class, cols predicted)\n";
    for (const auto& row : r.confusion) {
        out << ' ';
        for (auto v : row) out << ' ' << v;
        out << '\n';
    }
    out << "counters: degenerate " << r.counters.degenerate << ", grid clamped " << r.counters.grid_clamped
        << ", vocab clamped " << r.counters.vocab_clamped << ", ignored " << r.book.ignored << ", rejected "
        << r.book.rejected << ", crossing fills " << r.book.crossing_fills << '\n';
    out << "seeds: codebook " << r.stamp.at("codebook_seed") << ", rank " << r.stamp.at("rank_seed") << ", tie "
        << r.stamp.at("tie_seed") << ", tm " << r.stamp.at("tm_seed") << ", sample " << r.stamp.at("sample_seed")
        << '\n';
}

void write_report_jsonl(std::ostream& out, const BacktestReport& r) {
    nlohmann::ordered_json j;
    j["type"] = "backtest";
    j["version"] = kReportVersion;
    j["class_source"] = r.class_source;
    j["events"] = r.events;
    j["instants"] = r.instants;
    j["scored"] = r.scored;
    j["n_future"] = r.n_future;
    j["tick_size"] = r.tick_size;
    j["l2_error_plain"] = r.l2_plain;
    j["l2_error_adjusted"] = r.l2_adjusted;
    j["l2_plain_ticks"] = r.l2_plain_ticks;
    j["l2_adjusted_ticks"] = r.l2_adjusted_ticks;
    j["l2_mid_ticks"] = r.l2_mid_ticks;
    j["improvement_pct"] = r.improvement_pct;
    j["confusion"] = r.confusion;
    j["predicted_histogram"] = r.predicted_histogram;
    j["mean_spread_ticks"] = r.mean_spread_ticks;
    j["realized_vol"] = r.realized_vol;
    j["counters"] = counters_json(r.counters, r.book);
    j["config"] = r.stamp;
    out << j.dump() << '\n';
}

void write_timing_text(std::ostream& out, const TimingReport& t) {
    out << "update latency over " << t.samples << " events: p50 " << fmt_double(t.p50_ns) << " ns, p90 "
        << fmt_double(t.p90_ns) << " ns, p99 " << fmt_double(t.p99_ns) << " ns, max " << fmt_double(t.max_ns)
        << " ns, mean " << fmt_double(t.mean_ns) << " ns\n";
}

void write_timing_jsonl(std::ostream& out, const TimingReport& t) {
    nlohmann::ordered_json j{{"type", "timing"},       {"version", kReportVersion}, {"samples", t.samples},
                             {"p50_ns", t.p50_ns},     {"p90_ns", t.p90_ns},        {"p99_ns", t.p99_ns},
                             {"max_ns", t.max_ns},     {"mean_ns", t.mean_ns}};
    out << j.dump() << '\n';
}

void write_train_report_text(std::ostream& out, const TrainReport& r) {
    out << "tm training: " << r.epochs_run << " epochs, final train accuracy " << fmt_double(r.final_accuracy)
        << ", max included literals " << r.max_included << '\n';
    out << "epoch accuracy:";
    for (double a : r.epoch_accuracy) out << ' ' << fmt_double(a);
    out << "\nclauses by included-literal count:";
    for (std::size_t k = 0; k < r.literal_histogram.size(); ++k)
        if (r.literal_histogram[k]) out << ' ' << k << ':' << r.literal_histogram[k];
    out << '\n';
    if (!r.validation_score.empty()) {
        out << "held-out squared error by epoch:";
        for (double v : r.validation_score) out << ' ' << fmt_double(v);
        out << "\nselected epoch " << r.selected_epoch << '\n';
    }
}

void write_train_report_jsonl(std::ostream& out, const TrainReport& r) {
    nlohmann::ordered_json j{{"type", "tm_train"},
                             {"version", kReportVersion},
                             {"epochs_run", r.epochs_run},
                             {"final_accuracy", r.final_accuracy},
                             {"epoch_accuracy", r.epoch_accuracy},
                             {"max_included", r.max_included},
                             {"literal_histogram", r.literal_histogram},
                             {"validation_score", r.validation_score},
                             {"selected_epoch", r.selected_epoch}};
    out << j.dump() << '\n';
}

void write_microprice_report_text(std::ostream& out, const MicropriceTable& t) {
    const auto& grid = t.grid();
    std::size_t unvisited = 0;
    for (bool v : t.visited()) unvisited += v ? 0 : 1;
    out << "microprice: " << t.observations() << " observations, " << grid.n_states() << " states ("
        << unvisited << " unvisited), " << t.iterations() << " iterations, residual " << fmt_double(t.residual())
        << '\n';
    if (const auto gap = t.closed_form_gap())
        out << "closed-form gap " << fmt_double(*gap) << '\n';
    else
        out << "closed-form check unavailable\n";
    out << "G* (half ticks), one row per spread:\n";
    for (Ticks s = 1; s <= grid.max_spread(); ++s) {
        bool any = false;
        for (std::size_t b = 0; b < grid.n_imbalance(); ++b) any = any || t.visited()[grid.index(b, s)];
        if (!any) continue;
        out << "  S=" << s << ':';
        for (std::size_t b = 0; b < grid.n_imbalance(); ++b) out << ' ' << fmt_double(t.g_star()[grid.index(b, s)]);
        out << '\n';
    }
}

void write_microprice_report_jsonl(std::ostream& out, const MicropriceTable& t) {
    std::vector<double> g(t.g_star().data(), t.g_star().data() + t.g_star().size());
    nlohmann::ordered_json j{{"type", "microprice"},
                             {"version", kReportVersion},
                             {"observations", t.observations()},
                             {"n_imbalance", t.grid().n_imbalance()},
                             {"max_spread", t.grid().max_spread()},
                             {"iterations", t.iterations()},
                             {"residual", t.residual()},
                             {"g_star_half_ticks", g}};
    if (const auto gap = t.closed_form_gap()) j["closed_form_gap"] = *gap;
    out << j.dump() << '\n';
}

// --- end to end -------------------------------------------------------------

ExperimentResult run_experiment(std::span<const OrderEvent> events, const PipelineConfig& cfg, bool measure_latency) {
    cfg.validate();
    ExperimentResult x;
    x.split = split_index(events, cfg.train_fraction);
    const auto train = events.first(x.split);
    x.table = train_microprice_job(train, cfg, &x.collect);
    const auto samples = make_labels(events, cfg, x.table, 0, x.split, &x.labels);
    x.tm = train_tm_job(samples, cfg, &x.train);
    BacktestOptions opt;
    opt.start = x.split;
    opt.measure_latency = measure_latency;
    x.report = backtest(events, cfg, x.table, x.tm, opt, nullptr, &x.timing);
    return x;
}

}  // namespace microhd

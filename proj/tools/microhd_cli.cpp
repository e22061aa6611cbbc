// microhd command-line tool.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "microhd/event_io.hpp"
#include "microhd/pipeline.hpp"
#include "microhd/synth.hpp"

using namespace microhd;

namespace {

std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

struct ConfigFlags {
    std::string config_file;
    std::map<std::string, std::string> values;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "key = value config file");
        for (const auto& key : config_keys()) cmd->add_option(flag_name(key), values[key], "config key " + key);
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (!config_file.empty()) read_config(std::filesystem::path(config_file), cfg);
        for (const auto& [key, value] : values)
            if (!value.empty()) set_config_value(cfg, key, value);
        cfg.validate();
        return cfg;
    }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
    return out;
}

void check_order(const std::vector<OrderEvent>& events) {
    if (const auto i = first_time_regression(events))
        throw Error(ErrorCode::parse_error, "event " + std::to_string(*i) + ": timestamp goes backwards");
}

std::vector<OrderEvent> load_events(const std::string& path, const PipelineConfig& cfg) {
    auto events = read_events(std::filesystem::path(path), cfg.book.tick_size);
    check_order(events);
    return events;
}

std::span<const OrderEvent> training_part(const std::vector<OrderEvent>& events, const PipelineConfig& cfg,
                                          bool train_only) {
    std::span<const OrderEvent> all(events);
    return train_only ? all.first(split_index(all, cfg.train_fraction)) : all;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Order book microprice and tick-adjustment toolkit"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate raw CSV/JSONL events and write the canonical event file");
    std::string in_path, out_path;
    double ingest_tick = 0.01;
    bool ingest_strict = false;
    ingest->add_option("--input", in_path)->required();
    ingest->add_option("--output", out_path);
    ingest->add_option("--tick-size", ingest_tick);
    ingest->add_flag("--strict", ingest_strict, "reject events that do not apply cleanly");

    // synth-gen
    auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic event stream with a planted depth signal");
    SynthParams sp;
    std::uint64_t synth_seed = 1;
    std::string synth_out;
    synth->add_option("--output", synth_out)->required();
    synth->add_option("--seed", synth_seed);
    synth->add_option("--n-events", sp.n_events);
    synth->add_option("--base-price", sp.base_price);
    synth->add_option("--depth", sp.depth);
    synth->add_option("--base-size", sp.base_size);
    synth->add_option("--size-jitter", sp.size_jitter);
    synth->add_option("--move-rate", sp.move_rate);
    synth->add_option("--trade-rate", sp.trade_rate);
    synth->add_option("--regime-switch-rate", sp.regime_switch_rate);
    synth->add_option("--regime-scale", sp.regime_scale);
    synth->add_option("--p-signal", sp.p_signal);
    synth->add_option("--signal-threshold", sp.signal_threshold);
    synth->add_option("--top-tilt", sp.top_tilt);
    synth->add_option("--mean-gap-ns", sp.mean_gap_ns);

    // train-microprice
    auto* tmp = app.add_subcommand("train-microprice", "Estimate the microprice table");
    ConfigFlags tmp_cfg;
    std::string tmp_events, tmp_out, tmp_jsonl;
    bool tmp_train_only = false;
    tmp->add_option("--events", tmp_events)->required();
    tmp->add_option("--output", tmp_out)->required();
    tmp->add_option("--report-jsonl", tmp_jsonl);
    tmp->add_flag("--train-only", tmp_train_only, "use only events before the train/test split");
    tmp_cfg.attach(tmp);

    // make-labels
    auto* ml = app.add_subcommand("make-labels", "Build the labeled dataset from features and bars");
    ConfigFlags ml_cfg;
    std::string ml_events, ml_table, ml_out;
    bool ml_train_only = false;
    ml->add_option("--events", ml_events)->required();
    ml->add_option("--table", ml_table)->required();
    ml->add_option("--output", ml_out)->required();
    ml->add_flag("--train-only", ml_train_only, "sample only events before the train/test split");
    ml_cfg.attach(ml);

    // train-tm
    auto* ttm = app.add_subcommand("train-tm", "Train the Tsetlin machine pool on a labeled dataset");
    ConfigFlags ttm_cfg;
    std::string ttm_data, ttm_out, ttm_jsonl;
    ttm->add_option("--dataset", ttm_data)->required();
    ttm->add_option("--output", ttm_out)->required();
    ttm->add_option("--report-jsonl", ttm_jsonl);
    ttm_cfg.attach(ttm);

    // backtest
    auto* bt = app.add_subcommand("backtest", "Replay events and score plain vs adjusted microprice");
    ConfigFlags bt_cfg;
    std::string bt_events, bt_table, bt_pool, bt_jsonl, bt_series, bt_timing;
    bool bt_oracle = false, bt_test_only = false;
    bt->add_option("--events", bt_events)->required();
    bt->add_option("--table", bt_table)->required();
    bt->add_option("--pool", bt_pool);
    bt->add_option("--report-jsonl", bt_jsonl);
    bt->add_option("--series", bt_series, "per-instant CSV of plain, adjusted and truth");
    bt->add_option("--timing-jsonl", bt_timing, "also measure latency and write it here");
    bt->add_flag("--oracle", bt_oracle, "replace TM predictions with the true labels");
    bt->add_flag("--test-only", bt_test_only, "score only events after the train/test split");
    bt_cfg.attach(bt);

    // bench
    auto* bench = app.add_subcommand("bench", "Per-event latency of features + encoding + inference");
    ConfigFlags bench_cfg;
    std::string bench_events, bench_table, bench_pool;
    std::size_t bench_samples = 20000;
    bench->add_option("--events", bench_events)->required();
    bench->add_option("--table", bench_table)->required();
    bench->add_option("--pool", bench_pool)->required();
    bench->add_option("--samples", bench_samples);
    bench_cfg.attach(bench);

    // experiment
    auto* ex = app.add_subcommand("experiment", "Train on the first part of a stream and backtest on the rest");
    ConfigFlags ex_cfg;
    std::string ex_events, ex_jsonl;
    ex->add_option("--events", ex_events)->required();
    ex->add_option("--report-jsonl", ex_jsonl);
    ex_cfg.attach(ex);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            auto events = read_events(std::filesystem::path(in_path), ingest_tick);
            check_order(events);
            BookState book(BookConfig{5, ingest_tick, ingest_strict ? IngestMode::strict : IngestMode::lenient});
            for (std::size_t i = 0; i < events.size(); ++i) {
                const auto r = book.apply(events[i]);
                if (r.status == ApplyStatus::rejected)
                    throw Error(ErrorCode::rejected_event, "event " + std::to_string(i) + ": " + r.diagnostic);
            }
            if (!out_path.empty()) write_events(std::filesystem::path(out_path), events);
            const auto& c = book.counters();
            std::cout << events.size() << " events: applied " << c.applied << ", ignored " << c.ignored
                      << ", crossing fills " << c.crossing_fills << '\n';
        } else if (*synth) {
            SynthStats st;
            const auto events = synth_generate(sp, synth_seed, &st);
            write_events(std::filesystem::path(synth_out), events);
            std::cout << events.size() << " events, " << st.moves << " moves, " << st.signal_moves
                      << " signal moves (" << st.signal_followed << " followed), " << st.regime_switches
                      << " regime switches, " << st.trades << " trades\n";
        } else if (*tmp) {
            const auto cfg = tmp_cfg.resolve();
            const auto events = load_events(tmp_events, cfg);
            CollectStats st;
            const auto table = train_microprice_job(training_part(events, cfg, tmp_train_only), cfg, &st);
            table.save(std::filesystem::path(tmp_out));
            std::cout << st.top_changes << " top-of-book changes from " << st.events << " events\n";
            write_microprice_report_text(std::cout, table);
            if (!tmp_jsonl.empty()) {
                auto out = open_out(tmp_jsonl);
                write_microprice_report_jsonl(out, table);
            }
        } else if (*ml) {
            const auto cfg = ml_cfg.resolve();
            const auto events = load_events(ml_events, cfg);
            const auto table = MicropriceTable::load(std::filesystem::path(ml_table));
            const std::size_t end = ml_train_only ? split_index(events, cfg.train_fraction) : events.size();
            LabelStats st;
            const auto samples = make_labels(events, cfg, table, 0, end, &st);
            write_dataset(std::filesystem::path(ml_out), samples);
            std::cout << st.samples << " samples from " << st.bars << " bars (" << st.prints << " prints), "
                      << st.skipped_no_future << " without a future bar; classes";
            for (auto c : st.class_histogram) std::cout << ' ' << c;
            std::cout << '\n';
            if (st.lookahead_violations) throw Error(ErrorCode::invariant_violation, "look-ahead detected");
        } else if (*ttm) {
            const auto cfg = ttm_cfg.resolve();
            const auto samples = read_dataset(std::filesystem::path(ttm_data));
            TrainReport rep;
            const auto tm = train_tm_job(samples, cfg, &rep);
            tm.save(std::filesystem::path(ttm_out));
            write_train_report_text(std::cout, rep);
            if (!ttm_jsonl.empty()) {
                auto out = open_out(ttm_jsonl);
                write_train_report_jsonl(out, rep);
            }
        } else if (*bt) {
            const auto cfg = bt_cfg.resolve();
            const auto events = load_events(bt_events, cfg);
            const auto table = MicropriceTable::load(std::filesystem::path(bt_table));
            if (bt_pool.empty() && !bt_oracle) throw Error(ErrorCode::untrained_model, "--pool is required without --oracle");
            // Oracle playback still runs the pool; an untrained one is enough.
            const auto tm = bt_pool.empty() ? TsetlinMachine(cfg.tm) : TsetlinMachine::load(std::filesystem::path(bt_pool));
            BacktestOptions opt;
            opt.source = bt_oracle ? ClassSource::oracle : ClassSource::tm;
            opt.start = bt_test_only ? split_index(events, cfg.train_fraction) : 0;
            opt.measure_latency = !bt_timing.empty();
            BacktestSeries series;
            TimingReport timing;
            const auto rep = backtest(events, cfg, table, tm, opt, &series, &timing);
            write_report_text(std::cout, rep);
            if (!bt_jsonl.empty()) {
                auto out = open_out(bt_jsonl);
                write_report_jsonl(out, rep);
            }
            if (!bt_timing.empty()) {
                write_timing_text(std::cout, timing);
                auto out = open_out(bt_timing);
                write_timing_jsonl(out, timing);
            }
            if (!bt_series.empty()) {
                auto out = open_out(bt_series);
                out << "ts_ns,plain,adjusted,truth,class\n";
                for (std::size_t i = 0; i < series.plain.size(); ++i)
                    out << series.ts[i] << ',' << series.plain[i] << ',' << series.adjusted[i] << ','
                        << series.truth[i] << ',' << series.cls[i] << '\n';
            }
        } else if (*bench) {
            const auto cfg = bench_cfg.resolve();
            const auto events = load_events(bench_events, cfg);
            const auto table = MicropriceTable::load(std::filesystem::path(bench_table));
            const auto tm = TsetlinMachine::load(std::filesystem::path(bench_pool));
            write_timing_text(std::cout, bench_update(events, cfg, table, tm, bench_samples));
        } else if (*ex) {
            const auto cfg = ex_cfg.resolve();
            const auto events = load_events(ex_events, cfg);
            const auto x = run_experiment(events, cfg);
            std::cout << "split at event " << x.split << "; " << x.labels.samples << " labeled samples, classes";
            for (auto c : x.labels.class_histogram) std::cout << ' ' << c;
            std::cout << '\n';
            write_train_report_text(std::cout, x.train);
            write_report_text(std::cout, x.report);
            if (!ex_jsonl.empty()) {
                auto out = open_out(ex_jsonl);
                write_report_jsonl(out, x.report);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "microhd/encoder.hpp"
#include "microhd/event_io.hpp"
#include "microhd/features.hpp"
#include "microhd/hypervector.hpp"
#include "microhd/microprice.hpp"
#include "microhd/pipeline.hpp"
#include "microhd/synth.hpp"
#include "microhd/tsetlin.hpp"

namespace py = pybind11;
using namespace microhd;

namespace {

// Reports cross the boundary as JSON text; the Python side parses them.
template <typename T, typename F>
std::string jsonl(const T& value, F write) {
    std::ostringstream out;
    write(out, value);
    return out.str();
}

template <typename T>
py::bytes saved(const T& value) {
    std::ostringstream out;
    value.save(out);
    return py::bytes(out.str());
}

template <typename T>
T loaded(const py::bytes& data) {
    std::istringstream in{std::string(data)};
    return T::load(in);
}

PipelineConfig config_from(const py::dict& values) {
    PipelineConfig cfg;
    for (const auto& [k, v] : values) {
        const auto key = py::str(k).cast<std::string>();
        const auto text = py::isinstance<py::bool_>(v) ? std::string(v.cast<bool>() ? "true" : "false")
                                                       : py::str(v).cast<std::string>();
        set_config_value(cfg, key, text);
    }
    cfg.validate();
    return cfg;
}

py::dict config_dict(const PipelineConfig& cfg) {
    py::dict d;
    for (const auto& key : config_keys()) d[py::str(key)] = get_config_value(cfg, key);
    return d;
}

BitVector bits_from(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
    if (a.ndim() != 1) throw Error(ErrorCode::dimension_mismatch, "expected a 1-d bit array");
    BitVector b(static_cast<std::size_t>(a.shape(0)));
    const auto* p = a.data();
    for (py::ssize_t i = 0; i < a.shape(0); ++i) b.set(static_cast<std::size_t>(i), p[i] != 0);
    return b;
}

std::vector<BitVector> rows_from(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
    if (a.ndim() != 2) throw Error(ErrorCode::dimension_mismatch, "expected a 2-d bit array");
    std::vector<BitVector> rows;
    rows.reserve(static_cast<std::size_t>(a.shape(0)));
    const auto* p = a.data();
    for (py::ssize_t r = 0; r < a.shape(0); ++r) {
        BitVector b(static_cast<std::size_t>(a.shape(1)));
        for (py::ssize_t c = 0; c < a.shape(1); ++c) b.set(static_cast<std::size_t>(c), p[r * a.shape(1) + c] != 0);
        rows.push_back(std::move(b));
    }
    return rows;
}

py::array_t<std::uint8_t> bits_to(const BitVector& b) {
    py::array_t<std::uint8_t> out(static_cast<py::ssize_t>(b.size()));
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < b.size(); ++i) p[i] = b.test(i) ? 1 : 0;
    return out;
}

}  // namespace

PYBIND11_MODULE(_microhd, m) {
    m.doc() = "Order book microprice and Tsetlin tick-adjustment core";

    static py::exception<Error> error(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    py::enum_<Side>(m, "Side").value("bid", Side::bid).value("ask", Side::ask);
    py::enum_<Action>(m, "Action")
        .value("add", Action::add)
        .value("cancel", Action::cancel)
        .value("modify", Action::modify)
        .value("trade", Action::trade)
        .value("clear", Action::clear);

    py::class_<OrderEvent>(m, "OrderEvent")
        .def(py::init([](std::int64_t ts, Action a, Side s, Ticks price, std::int64_t size,
                         std::optional<std::uint64_t> id) { return OrderEvent{ts, a, s, price, size, id}; }),
             py::arg("ts_ns"), py::arg("action"), py::arg("side"), py::arg("price"), py::arg("size"),
             py::arg("order_id") = std::nullopt)
        .def_readwrite("ts_ns", &OrderEvent::ts_ns)
        .def_readwrite("action", &OrderEvent::action)
        .def_readwrite("side", &OrderEvent::side)
        .def_readwrite("price", &OrderEvent::price)
        .def_readwrite("size", &OrderEvent::size)
        .def_readwrite("order_id", &OrderEvent::order_id)
        .def(py::self == py::self)
        .def("__repr__", [](const OrderEvent& e) {
            return "OrderEvent(" + std::to_string(e.ts_ns) + ", " + std::string(to_string(e.action)) + ", " +
                   std::string(to_string(e.side)) + ", " + std::to_string(e.price) + ", " + std::to_string(e.size) + ")";
        });

    py::class_<BookState>(m, "Book")
        .def(py::init([](std::size_t depth, double tick_size, bool strict) {
                 return BookState(BookConfig{depth, tick_size, strict ? IngestMode::strict : IngestMode::lenient});
             }),
             py::arg("depth") = 5, py::arg("tick_size") = 0.01, py::arg("strict") = false)
        .def("apply", [](BookState& b, const OrderEvent& e) {
            const auto r = b.apply(e);
            return py::make_tuple(r.status == ApplyStatus::applied, r.top_changed);
        })
        .def("bids", [](const BookState& b) {
            std::vector<std::pair<Ticks, std::int64_t>> out;
            for (const auto& l : b.bids()) out.emplace_back(l.price, l.size);
            return out;
        })
        .def("asks", [](const BookState& b) {
            std::vector<std::pair<Ticks, std::int64_t>> out;
            for (const auto& l : b.asks()) out.emplace_back(l.price, l.size);
            return out;
        })
        .def("mid", [](const BookState& b) -> std::optional<double> {
            const auto m = mid_price(b);
            return m ? std::optional(m->ticks()) : std::nullopt;
        })
        .def("imbalance", [](const BookState& b) { return imbalance(b); })
        .def("spread", [](const BookState& b) { return spread_ticks(b); })
        .def("volume_shares", [](const BookState& b, std::size_t L) {
            const auto v = volume_percentages(b, L);
            return py::make_tuple(v.bid, v.ask);
        }, py::arg("depth"))
        .def("features", [](const BookState& b, double g_star) {
            return assemble_feature_vector(b, g_star).flatten();
        }, py::arg("g_star_ticks") = 0.0);

    m.def("read_events", [](const std::filesystem::path& p, double tick) { return read_events(p, tick); },
          py::arg("path"), py::arg("tick_size") = 0.01);
    m.def("write_events", [](const std::filesystem::path& p, const std::vector<OrderEvent>& ev) { write_events(p, ev); },
          py::arg("path"), py::arg("events"));

    m.def("synth_generate", [](const py::dict& params, std::uint64_t seed) {
        SynthParams sp;
        for (const auto& [k, v] : params) {
            const auto key = py::str(k).cast<std::string>();
            if (key == "n_events") sp.n_events = v.cast<std::size_t>();
            else if (key == "base_price") sp.base_price = v.cast<Ticks>();
            else if (key == "depth") sp.depth = v.cast<std::size_t>();
            else if (key == "base_size") sp.base_size = v.cast<double>();
            else if (key == "size_jitter") sp.size_jitter = v.cast<double>();
            else if (key == "move_rate") sp.move_rate = v.cast<double>();
            else if (key == "trade_rate") sp.trade_rate = v.cast<double>();
            else if (key == "regime_switch_rate") sp.regime_switch_rate = v.cast<double>();
            else if (key == "regime_scale") sp.regime_scale = v.cast<double>();
            else if (key == "p_signal") sp.p_signal = v.cast<double>();
            else if (key == "signal_threshold") sp.signal_threshold = v.cast<double>();
            else if (key == "top_tilt") sp.top_tilt = v.cast<double>();
            else if (key == "mean_gap_ns") sp.mean_gap_ns = v.cast<double>();
            else throw Error(ErrorCode::invalid_argument, "unknown synthetic parameter '" + key + "'");
        }
        SynthStats st;
        auto events = synth_generate(sp, seed, &st);
        py::dict stats;
        stats["moves"] = st.moves;
        stats["signal_moves"] = st.signal_moves;
        stats["signal_followed"] = st.signal_followed;
        stats["regime_switches"] = st.regime_switches;
        stats["trades"] = st.trades;
        return py::make_tuple(std::move(events), stats);
    }, py::arg("params") = py::dict(), py::arg("seed") = 1);

    m.def("config_keys", &config_keys);
    m.def("default_config", [] { return config_dict(PipelineConfig{}); });
    m.def("resolve_config", [](const py::dict& d) { return config_dict(config_from(d)); }, py::arg("values"));

    py::class_<MicropriceTable>(m, "MicropriceTable")
        .def_property_readonly("g_star", &MicropriceTable::g_star)
        .def_property_readonly("g1", &MicropriceTable::g1)
        .def_property_readonly("B", &MicropriceTable::B)
        .def_property_readonly("iterations", &MicropriceTable::iterations)
        .def_property_readonly("residual", &MicropriceTable::residual)
        .def_property_readonly("observations", &MicropriceTable::observations)
        .def_property_readonly("n_imbalance", [](const MicropriceTable& t) { return t.grid().n_imbalance(); })
        .def_property_readonly("max_spread", [](const MicropriceTable& t) { return t.grid().max_spread(); })
        .def("adjustment", [](const MicropriceTable& t, std::int64_t bid_size, std::int64_t ask_size, Ticks spread) {
            return t.adjustment({bid_size, ask_size}, spread);
        }, py::arg("bid_size"), py::arg("ask_size"), py::arg("spread"))
        .def("report", [](const MicropriceTable& t) { return jsonl(t, write_microprice_report_jsonl); })
        .def("save", [](const MicropriceTable& t) { return saved(t); })
        .def_static("load", &loaded<MicropriceTable>)
        .def(py::self == py::self);

    py::class_<TsetlinMachine>(m, "TsetlinMachine")
        .def(py::init([](std::uint32_t n_features, std::uint32_t n_clauses, std::uint32_t n_classes,
                         std::int32_t threshold, double specificity, std::uint32_t max_literals,
                         std::uint32_t ta_states, std::uint64_t seed) {
                 TMConfig c;
                 c.n_features = n_features;
                 c.n_clauses = n_clauses;
                 c.n_classes = n_classes;
                 c.threshold = threshold;
                 c.specificity = specificity;
                 c.max_literals = max_literals;
                 c.ta_states = ta_states;
                 c.seed = seed;
                 c.neutral_class = (n_classes - 1) / 2;
                 return TsetlinMachine(c);
             }),
             py::arg("n_features"), py::arg("n_clauses") = TMConfig{}.n_clauses,
             py::arg("n_classes") = TMConfig{}.n_classes, py::arg("threshold") = TMConfig{}.threshold,
             py::arg("specificity") = TMConfig{}.specificity, py::arg("max_literals") = TMConfig{}.max_literals,
             py::arg("ta_states") = TMConfig{}.ta_states, py::arg("seed") = TMConfig{}.seed)
        .def("train", [](TsetlinMachine& tm, py::array_t<std::uint8_t> x, std::vector<std::uint32_t> y,
                         std::uint32_t epochs) {
            const auto rows = rows_from(x);
            py::gil_scoped_release release;
            const auto r = tm.train(rows, y, epochs);
            return std::make_tuple(r.epoch_accuracy, r.max_included);
        }, py::arg("x"), py::arg("y"), py::arg("epochs"))
        .def("predict", [](const TsetlinMachine& tm, py::array_t<std::uint8_t> x) { return tm.predict(bits_from(x)); })
        .def("scores", [](const TsetlinMachine& tm, py::array_t<std::uint8_t> x) { return tm.scores(bits_from(x)); })
        .def("accuracy", [](const TsetlinMachine& tm, py::array_t<std::uint8_t> x, std::vector<std::uint32_t> y) {
            return tm.accuracy(rows_from(x), y);
        })
        .def("included", [](const TsetlinMachine& tm, std::size_t clause) {
            const auto s = tm.included(clause);
            return std::vector<std::uint32_t>(s.begin(), s.end());
        })
        .def("literal_histogram", &TsetlinMachine::literal_histogram)
        .def("save", [](const TsetlinMachine& t) { return saved(t); })
        .def_static("load", &loaded<TsetlinMachine>)
        .def(py::self == py::self);

    py::class_<Encoder>(m, "Encoder")
        .def(py::init([](const py::dict& cfg) { return Encoder(config_from(cfg).encoder); }),
             py::arg("config") = py::dict())
        .def_property_readonly("dimension", [](const Encoder& e) { return e.shape().dimension(); })
        .def("encode", [](const Encoder& e, std::vector<double> p_ask, std::vector<double> p_bid, Ticks spread,
                          std::int64_t delta_m_half_ticks, double g_star_ticks) {
            const FeatureVector f{std::move(p_ask), std::move(p_bid), spread, MidDelta{delta_m_half_ticks}, g_star_ticks};
            const auto hv = e.encode(f);
            return std::vector<SparseHypervector::Index>(hv.indices().begin(), hv.indices().end());
        }, py::arg("p_ask"), py::arg("p_bid"), py::arg("spread"), py::arg("delta_m_half_ticks"), py::arg("g_star_ticks"))
        .def("literals", [](const Encoder& e, std::vector<double> p_ask, std::vector<double> p_bid, Ticks spread,
                            std::int64_t delta_m_half_ticks, double g_star_ticks) {
            const FeatureVector f{std::move(p_ask), std::move(p_bid), spread, MidDelta{delta_m_half_ticks}, g_star_ticks};
            return bits_to(to_literal_array(e.encode(f)));
        }, py::arg("p_ask"), py::arg("p_bid"), py::arg("spread"), py::arg("delta_m_half_ticks"), py::arg("g_star_ticks"));

    // Hypervectors as index lists (one entry per segment).
    using Indices = std::vector<SparseHypervector::Index>;
    auto hv = [](std::uint32_t len, const Indices& idx) { return SparseHypervector(len, idx); };
    auto out = [](const SparseHypervector& v) { return Indices(v.indices().begin(), v.indices().end()); };
    m.def("hv_random", [out](std::uint64_t seed, std::uint32_t n_segments, std::uint32_t segment_len) {
        Rng rng(seed);
        return out(random_hv(rng, {n_segments, segment_len}));
    }, py::arg("seed"), py::arg("n_segments") = 256, py::arg("segment_len") = 32);
    m.def("hv_bind", [hv, out](const Indices& k, const Indices& v, std::uint32_t len) {
        return out(bind(hv(len, k), hv(len, v)));
    }, py::arg("key"), py::arg("value"), py::arg("segment_len") = 32);
    m.def("hv_unbind", [hv, out](const Indices& k, const Indices& v, std::uint32_t len) {
        return out(unbind(hv(len, k), hv(len, v)));
    }, py::arg("key"), py::arg("bound"), py::arg("segment_len") = 32);
    m.def("hv_permute", [hv, out](const Indices& v, std::uint64_t j, std::uint32_t len) {
        return out(permute(hv(len, v), j));
    }, py::arg("v"), py::arg("shift"), py::arg("segment_len") = 32);
    m.def("hv_bundle", [hv, out](const std::vector<Indices>& vs, std::uint64_t seed, std::uint64_t counter,
                                 std::uint32_t len) {
        std::vector<SparseHypervector> in;
        for (const auto& v : vs) in.push_back(hv(len, v));
        return out(bundle(in, {seed, counter}));
    }, py::arg("vectors"), py::arg("tie_seed") = 0, py::arg("tie_counter") = 0, py::arg("segment_len") = 32);
    m.def("hv_similarity", [hv](const Indices& a, const Indices& b, std::uint32_t len) {
        return similarity(hv(len, a), hv(len, b));
    }, py::arg("a"), py::arg("b"), py::arg("segment_len") = 32);

    py::class_<Pipeline>(m, "Pipeline")
        .def(py::init([](const py::dict& cfg, const MicropriceTable& t, const TsetlinMachine& tm) {
                 return Pipeline(config_from(cfg), t, tm);
             }),
             py::arg("config"), py::arg("table"), py::arg("pool"))
        .def("run_update", [](Pipeline& p, const OrderEvent& e) {
            const auto r = p.run_update(e);
            return py::make_tuple(r.valid, r.plain, r.adjusted, r.cls);
        });

    m.def("train_microprice", [](const std::vector<OrderEvent>& ev, const py::dict& cfg) {
        return train_microprice_job(ev, config_from(cfg));
    }, py::arg("events"), py::arg("config") = py::dict());

    m.def("make_labels", [](const std::vector<OrderEvent>& ev, const py::dict& cfg, const MicropriceTable& t) {
        LabelStats st;
        const auto samples = make_labels(ev, config_from(cfg), t, &st);
        std::vector<py::tuple> rows;
        for (const auto& s : samples)
            rows.push_back(py::make_tuple(s.ts_ns, s.features.flatten(), s.microprice, s.future_close, s.future_ts, s.label));
        py::dict stats;
        stats["samples"] = st.samples;
        stats["bars"] = st.bars;
        stats["lookahead_violations"] = st.lookahead_violations;
        stats["class_histogram"] = st.class_histogram;
        return py::make_tuple(rows, stats);
    }, py::arg("events"), py::arg("config"), py::arg("table"));

    m.def("evaluate_l2", [](const std::vector<double>& p, const std::vector<double>& y, std::size_t n) {
        return evaluate_l2(p, y, n);
    }, py::arg("predictions"), py::arg("truths"), py::arg("n_future"));

    m.def("run_experiment", [](const std::vector<OrderEvent>& ev, const py::dict& cfg) {
        ExperimentResult x;
        {
            const auto c = config_from(cfg);
            py::gil_scoped_release release;
            x = run_experiment(ev, c);
        }
        return py::make_tuple(std::move(x.table), std::move(x.tm), jsonl(x.train, write_train_report_jsonl),
                              jsonl(x.report, write_report_jsonl), x.split);
    }, py::arg("events"), py::arg("config") = py::dict());

    m.def("backtest", [](const std::vector<OrderEvent>& ev, const py::dict& cfg, const MicropriceTable& t,
                         const TsetlinMachine& tm, std::size_t start, bool oracle) {
        BacktestOptions opt;
        opt.start = start;
        opt.source = oracle ? ClassSource::oracle : ClassSource::tm;
        return jsonl(backtest(ev, config_from(cfg), t, tm, opt), write_report_jsonl);
    }, py::arg("events"), py::arg("config"), py::arg("table"), py::arg("pool"), py::arg("start") = 0,
       py::arg("oracle") = false);
}

#include "microhd/tsetlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace microhd {

void TMConfig::validate() const {
    if (n_clauses == 0) throw Error(ErrorCode::invalid_argument, "n_clauses must be > 0");
    if (n_classes < 2) throw Error(ErrorCode::invalid_argument, "n_classes must be >= 2");
    if (threshold <= 0) throw Error(ErrorCode::invalid_argument, "threshold must be > 0");
    if (!(specificity > 1.0)) throw Error(ErrorCode::invalid_argument, "specificity must be > 1");
    if (max_literals == 0) throw Error(ErrorCode::invalid_argument, "max_literals must be >= 1");
    if (n_features == 0) throw Error(ErrorCode::invalid_argument, "n_features must be > 0");
    if (ta_states < 2 || ta_states > 32767) throw Error(ErrorCode::invalid_argument, "ta_states must be in [2, 32767]");
    if (neutral_class >= n_classes) throw Error(ErrorCode::invalid_argument, "neutral_class out of range");
}

TsetlinMachine::TsetlinMachine(TMConfig config) : config_(config) {
    config_.validate();
    clauses_.resize(config_.n_clauses);
    for (auto& c : clauses_) c.state.assign(config_.n_literals(), 1);
    weights_.assign(static_cast<std::size_t>(config_.n_classes) * config_.n_clauses, 0);
    // Per class, a random half of the clauses starts at +1 and the rest at -1.
    Rng rng(mix_seed(config_.seed, 0x7e57));
    std::vector<std::uint32_t> order(config_.n_clauses);
    for (std::uint32_t c = 0; c < config_.n_classes; ++c) {
        std::iota(order.begin(), order.end(), 0U);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
        for (std::size_t i = 0; i < order.size(); ++i)
            set_weight(c, order[i], i < order.size() / 2 ? 1 : -1);
    }
}

void TsetlinMachine::check_input(const BitVector& x) const {
    if (x.size() != config_.n_features)
        throw Error(ErrorCode::dimension_mismatch, "input has " + std::to_string(x.size()) + " bits, machine expects " +
                                                       std::to_string(config_.n_features));
}

bool TsetlinMachine::clause_output(std::size_t clause, const BitVector& x, bool training) const {
    const Clause& c = clauses_.at(clause);
    if (c.included.empty()) return training;
    for (auto lit : c.included)
        if (!literal_value(lit, x)) return false;
    return true;
}

void TsetlinMachine::clause_outputs(const BitVector& x, bool training, std::vector<std::uint8_t>& out) const {
    out.resize(clauses_.size());
    for (std::size_t j = 0; j < clauses_.size(); ++j) out[j] = clause_output(j, x, training) ? 1 : 0;
}

std::vector<std::int64_t> TsetlinMachine::scores(const BitVector& x) const {
    check_input(x);
    std::vector<std::int64_t> s(config_.n_classes, 0);
    for (std::size_t j = 0; j < clauses_.size(); ++j) {
        if (!clause_output(j, x, false)) continue;
        for (std::uint32_t c = 0; c < config_.n_classes; ++c) s[c] += weight(c, j);
    }
    return s;
}

std::uint32_t TsetlinMachine::predict(const BitVector& x, std::vector<std::int64_t>& s) const {
    check_input(x);
    s.assign(config_.n_classes, 0);
    const std::size_t n = config_.n_clauses;
    for (std::size_t j = 0; j < n; ++j) {
        if (!clause_output(j, x, false)) continue;
        for (std::uint32_t c = 0; c < config_.n_classes; ++c) s[c] += weights_[c * n + j];
    }
    const std::int64_t best = *std::max_element(s.begin(), s.end());
    if (s[config_.neutral_class] == best) return config_.neutral_class;
    return static_cast<std::uint32_t>(std::find(s.begin(), s.end(), best) - s.begin());
}

std::uint32_t TsetlinMachine::predict(const BitVector& x) const {
    std::vector<std::int64_t> s;
    return predict(x, s);
}

void TsetlinMachine::increment(Clause& c, std::uint32_t literal) {
    std::uint16_t& st = c.state[literal];
    if (st >= 2 * config_.ta_states) return;
    if (st == config_.ta_states) {
        if (c.included.size() >= config_.max_literals) return;  // literal budget
        c.included.push_back(literal);
    }
    ++st;
}

bool TsetlinMachine::decrement(Clause& c, std::uint32_t literal) {
    std::uint16_t& st = c.state[literal];
    if (st <= 1) return false;
    if (st == config_.ta_states + 1) c.included.erase(std::find(c.included.begin(), c.included.end(), literal));
    --st;
    return st > 1;
}

namespace {

// Bernoulli(q) trials drawn by geometric skipping: one random number per
// success instead of one per trial.
class SkipGate {
public:
    SkipGate(double q, Rng& rng) : q_(q), log_miss_(std::log1p(-q)), rng_(rng) { draw(); }

    bool next() {
        if (gap_ == 0) {
            draw();
            return true;
        }
        --gap_;
        return false;
    }

private:
    void draw() {
        if (q_ >= 1.0) {
            gap_ = 0;
            return;
        }
        const double g = std::floor(std::log1p(-uniform01(rng_)) / log_miss_);
        gap_ = g >= 1e18 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(g);
    }

    double q_;
    double log_miss_;
    Rng& rng_;
    std::uint64_t gap_ = 0;
};

}  // namespace

void TsetlinMachine::type_i(Clause& c, bool fired, const BitVector& x, Rng& rng) {
    const double p_dec = 1.0 / config_.specificity;
    // Two independent trial streams: true literals of a firing clause are
    // reinforced with probability 1 - 1/s, everything else decays with 1/s.
    SkipGate skip_inc(p_dec, rng);
    SkipGate dec(p_dec, rng);
    std::size_t keep = 0;
    for (std::size_t r = 0; r < c.active.size(); ++r) {
        const std::uint32_t lit = c.active[r];
        bool alive = true;
        if (fired && literal_value(lit, x)) {
            if (!skip_inc.next()) increment(c, lit);
        } else if (dec.next()) {
            alive = decrement(c, lit);
        }
        if (alive) c.active[keep++] = lit;
    }
    c.active.resize(keep);
    if (!fired) return;
    // Resting positive literals that are true join the active set.
    for (auto b : ones_) {
        if (c.state[b] == 1 && !skip_inc.next()) {
            c.state[b] = 2;
            c.active.push_back(b);
        }
    }
}

void TsetlinMachine::type_ii(Clause& c, const BitVector& x, Rng& rng) {
    if (c.included.size() >= config_.max_literals) return;
    const std::uint16_t ta = static_cast<std::uint16_t>(config_.ta_states);
    std::uint32_t best = 0;
    std::uint16_t best_state = 0;
    for (auto lit : c.active) {
        const std::uint16_t st = c.state[lit];
        if (st <= ta && st > best_state && !literal_value(lit, x)) {
            best = lit;
            best_state = st;
        }
    }
    if (best_state == 0) {
        if (ones_.empty()) return;
        best = config_.n_features + ones_[uniform_below(rng, ones_.size())];
        // Already included by an earlier update on this same sample.
        if (c.state[best] > ta) return;
        if (c.state[best] == 1) c.active.push_back(best);
    }
    c.state[best] = static_cast<std::uint16_t>(ta + 1);
    c.included.push_back(best);
}

void TsetlinMachine::fit_one(const BitVector& x, std::uint32_t label, Rng& rng) {
    check_input(x);
    if (label >= config_.n_classes)
        throw Error(ErrorCode::invalid_argument, "class " + std::to_string(label) + " out of range");
    x.ones(ones_);
    clause_outputs(x, true, fired_);
    const std::size_t n = config_.n_clauses;
    const std::int64_t T = config_.threshold;

    auto vote = [&](std::uint32_t cls) {
        std::int64_t v = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (fired_[j]) v += weights_[cls * n + j];
        return std::clamp<std::int64_t>(v, -T, T);
    };

    const double p_target = static_cast<double>(T - vote(label)) / static_cast<double>(2 * T);
    for (std::size_t j = 0; j < n; ++j) {
        if (!bernoulli(rng, p_target)) continue;
        std::int32_t& w = weights_[label * n + j];
        if (w >= 0)
            type_i(clauses_[j], fired_[j] != 0, x, rng);
        else if (fired_[j])
            type_ii(clauses_[j], x, rng);
        if (fired_[j]) ++w;
    }

    auto other = static_cast<std::uint32_t>(uniform_below(rng, config_.n_classes - 1));
    if (other >= label) ++other;
    const double p_other = static_cast<double>(T + vote(other)) / static_cast<double>(2 * T);
    for (std::size_t j = 0; j < n; ++j) {
        if (!bernoulli(rng, p_other)) continue;
        std::int32_t& w = weights_[other * n + j];
        if (w >= 0) {
            if (fired_[j]) type_ii(clauses_[j], x, rng);
        } else {
            type_i(clauses_[j], fired_[j] != 0, x, rng);
        }
        if (fired_[j]) --w;
    }
}

double TsetlinMachine::accuracy(std::span<const BitVector> xs, std::span<const std::uint32_t> labels) const {
    if (xs.size() != labels.size()) throw Error(ErrorCode::dimension_mismatch, "inputs and labels differ in length");
    if (xs.empty()) return 0.0;
    std::vector<std::int64_t> scratch;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) hit += predict(xs[i], scratch) == labels[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(xs.size());
}

TrainReport TsetlinMachine::train(std::span<const BitVector> xs, std::span<const std::uint32_t> labels,
                                  std::uint32_t epochs, double stop_accuracy, const EpochHook& on_epoch) {
    if (xs.size() != labels.size()) throw Error(ErrorCode::dimension_mismatch, "inputs and labels differ in length");
    if (xs.empty()) throw Error(ErrorCode::insufficient_data, "empty training set");
    for (auto y : labels)
        if (y >= config_.n_classes) throw Error(ErrorCode::invalid_argument, "class " + std::to_string(y) + " out of range");
    Rng rng(mix_seed(config_.seed, 0x7a1));
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    TrainReport report;
    for (std::uint32_t e = 0; e < epochs; ++e) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
        for (auto i : order) fit_one(xs[i], labels[i], rng);
        report.epoch_accuracy.push_back(accuracy(xs, labels));
        report.epochs_run = e + 1;
        if (report.epoch_accuracy.back() >= stop_accuracy) break;
        if (on_epoch && !on_epoch(e + 1, *this)) break;
    }
    report.final_accuracy = report.epoch_accuracy.empty() ? 0.0 : report.epoch_accuracy.back();
    report.literal_histogram = literal_histogram();
    for (const auto& c : clauses_)
        report.max_included = std::max(report.max_included, static_cast<std::uint32_t>(c.included.size()));
    return report;
}

void TsetlinMachine::set_ta_state(std::size_t clause, std::uint32_t literal, std::uint16_t state) {
    if (state < 1 || state > 2 * config_.ta_states) throw Error(ErrorCode::invalid_argument, "TA state out of range");
    Clause& c = clauses_.at(clause);
    const std::uint16_t old = c.state.at(literal);
    const bool was_in = old > config_.ta_states;
    const bool now_in = state > config_.ta_states;
    if (now_in && !was_in && c.included.size() >= config_.max_literals)
        throw Error(ErrorCode::invalid_argument, "literal budget exhausted");
    if (was_in && !now_in) c.included.erase(std::find(c.included.begin(), c.included.end(), literal));
    if (now_in && !was_in) c.included.push_back(literal);
    if (old == 1 && state > 1) c.active.push_back(literal);
    if (old > 1 && state == 1) c.active.erase(std::find(c.active.begin(), c.active.end(), literal));
    c.state[literal] = state;
}

std::vector<std::uint64_t> TsetlinMachine::literal_histogram() const {
    std::vector<std::uint64_t> h(config_.max_literals + 1, 0);
    for (const auto& c : clauses_) ++h[std::min<std::size_t>(c.included.size(), config_.max_literals)];
    return h;
}

bool TsetlinMachine::operator==(const TsetlinMachine& other) const {
    return config_ == other.config_ && weights_ == other.weights_ && clauses_ == other.clauses_;
}

namespace {
constexpr const char* kPoolMagic = "microhd-tm";
constexpr int kPoolVersion = 1;

template <typename T>
T expect(std::istream& in, const char* name) {
    std::string key;
    T v{};
    if (!(in >> key >> v) || key != name)
        throw Error(ErrorCode::parse_error, std::string("tsetlin pool: expected '") + name + "'");
    return v;
}
}  // namespace

void TsetlinMachine::save(std::ostream& out) const {
    out << kPoolMagic << ' ' << kPoolVersion << '\n'
        << "n_clauses " << config_.n_clauses << '\n'
        << "n_classes " << config_.n_classes << '\n'
        << "threshold " << config_.threshold << '\n'
        << "specificity " << hexfloat(config_.specificity) << '\n'
        << "max_literals " << config_.max_literals << '\n'
        << "n_features " << config_.n_features << '\n'
        << "ta_states " << config_.ta_states << '\n'
        << "epochs " << config_.epochs << '\n'
        << "seed " << config_.seed << '\n'
        << "neutral_class " << config_.neutral_class << '\n'
        << "weights\n";
    const std::size_t n = config_.n_clauses;
    for (std::uint32_t c = 0; c < config_.n_classes; ++c) {
        for (std::size_t j = 0; j < n; ++j) out << (j ? " " : "") << weights_[c * n + j];
        out << '\n';
    }
    out << "clauses\n";
    for (const auto& c : clauses_) {
        out << c.active.size();
        for (auto lit : c.active) out << ' ' << lit << ' ' << c.state[lit];
        out << " | " << c.included.size();
        for (auto lit : c.included) out << ' ' << lit;
        out << '\n';
    }
}

void TsetlinMachine::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    save(out);
}

TsetlinMachine TsetlinMachine::load(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kPoolMagic) throw Error(ErrorCode::parse_error, "not a tsetlin pool file");
    if (version != kPoolVersion) throw Error(ErrorCode::parse_error, "unsupported pool version " + std::to_string(version));
    TMConfig cfg;
    cfg.n_clauses = expect<std::uint32_t>(in, "n_clauses");
    cfg.n_classes = expect<std::uint32_t>(in, "n_classes");
    cfg.threshold = expect<std::int32_t>(in, "threshold");
    cfg.specificity = parse_hexfloat(expect<std::string>(in, "specificity"));
    cfg.max_literals = expect<std::uint32_t>(in, "max_literals");
    cfg.n_features = expect<std::uint32_t>(in, "n_features");
    cfg.ta_states = expect<std::uint32_t>(in, "ta_states");
    cfg.epochs = expect<std::uint32_t>(in, "epochs");
    cfg.seed = expect<std::uint64_t>(in, "seed");
    cfg.neutral_class = expect<std::uint32_t>(in, "neutral_class");
    TsetlinMachine tm(cfg);
    std::string word;
    if (!(in >> word) || word != "weights") throw Error(ErrorCode::parse_error, "tsetlin pool: missing weights");
    for (auto& w : tm.weights_)
        if (!(in >> w)) throw Error(ErrorCode::parse_error, "tsetlin pool: truncated weights");
    if (!(in >> word) || word != "clauses") throw Error(ErrorCode::parse_error, "tsetlin pool: missing clauses");
    for (auto& c : tm.clauses_) {
        std::size_t n_active = 0, n_included = 0;
        if (!(in >> n_active)) throw Error(ErrorCode::parse_error, "tsetlin pool: truncated clause");
        c.active.resize(n_active);
        for (auto& lit : c.active) {
            unsigned st = 0;
            if (!(in >> lit >> st) || lit >= cfg.n_literals() || st < 2 || st > 2 * cfg.ta_states)
                throw Error(ErrorCode::parse_error, "tsetlin pool: bad literal record");
            c.state[lit] = static_cast<std::uint16_t>(st);
        }
        if (!(in >> word >> n_included) || word != "|" || n_included > cfg.max_literals)
            throw Error(ErrorCode::parse_error, "tsetlin pool: bad include list");
        c.included.resize(n_included);
        for (auto& lit : c.included)
            if (!(in >> lit) || lit >= cfg.n_literals() || c.state[lit] <= cfg.ta_states)
                throw Error(ErrorCode::parse_error, "tsetlin pool: include list disagrees with states");
    }
    return tm;
}

TsetlinMachine TsetlinMachine::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return load(in);
}

}  // namespace microhd

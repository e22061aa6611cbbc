#pragma once

// Coalesced multi-class Tsetlin machine over sparse binary inputs.
//
// One clause pool is shared by every class; class c scores
// sum_j w[c][j] * clause_j(x) with signed integer weights. Literal k < N is
// input bit k, literal N + k its negation.
//
// Automaton states run 1..2*ta_states and a literal is included once its
// state exceeds ta_states. Only literals that have been reinforced at least
// once ("active") are stored; every other literal rests at state 1. Positive
// literals become active through Type Ia feedback, negated literals through
// Type II feedback, which is what keeps a clause's cost proportional to the
// input's set bits rather than to 2N.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "microhd/bitvector.hpp"
#include "microhd/common.hpp"

namespace microhd {

struct TMConfig {
    std::uint32_t n_clauses = 512;
    std::uint32_t n_classes = 5;
    std::int32_t threshold = 128;      ///< T
    double specificity = 10.0;         ///< s
    std::uint32_t max_literals = 32;
    std::uint32_t n_features = 8192;   ///< N; literals = 2N
    std::uint32_t ta_states = 128;
    std::uint32_t epochs = 50;
    std::uint64_t seed = 42;
    std::uint32_t neutral_class = 2;   ///< preferred on score ties

    [[nodiscard]] std::uint32_t n_literals() const noexcept { return 2 * n_features; }
    void validate() const;
    bool operator==(const TMConfig&) const = default;
};

struct TrainReport {
    std::vector<double> epoch_accuracy;           ///< training accuracy after each epoch
    double final_accuracy = 0.0;
    std::vector<std::uint64_t> literal_histogram;  ///< clauses by included-literal count
    std::uint32_t max_included = 0;
    std::uint32_t epochs_run = 0;
    // Filled by callers that select a snapshot on held-out data; empty otherwise.
    std::vector<double> validation_score;  ///< index 0 is the untrained pool
    std::uint32_t selected_epoch = 0;
};

class TsetlinMachine {
public:
    explicit TsetlinMachine(TMConfig config = {});

    [[nodiscard]] const TMConfig& config() const noexcept { return config_; }

    /// Conjunction of the clause's included literals. An empty clause is 1
    /// while training and 0 at inference.
    [[nodiscard]] bool clause_output(std::size_t clause, const BitVector& x, bool training = false) const;

    [[nodiscard]] std::vector<std::int64_t> scores(const BitVector& x) const;
    [[nodiscard]] std::uint32_t predict(const BitVector& x) const;
    /// Same as predict, using caller-provided scratch for the hot path.
    [[nodiscard]] std::uint32_t predict(const BitVector& x, std::vector<std::int64_t>& scratch) const;

    /// One stochastic update toward `label`.
    void fit_one(const BitVector& x, std::uint32_t label, Rng& rng);

    /// Called after every epoch with the 1-based epoch number; returning false stops training.
    using EpochHook = std::function<bool(std::uint32_t, const TsetlinMachine&)>;

    /// Shuffled epochs with an rng seeded from config.seed. Stops early once
    /// training accuracy reaches `stop_accuracy` (never, by default).
    TrainReport train(std::span<const BitVector> xs, std::span<const std::uint32_t> labels, std::uint32_t epochs,
                      double stop_accuracy = 2.0, const EpochHook& on_epoch = {});
    TrainReport train(std::span<const BitVector> xs, std::span<const std::uint32_t> labels) {
        return train(xs, labels, config_.epochs);
    }

    [[nodiscard]] double accuracy(std::span<const BitVector> xs, std::span<const std::uint32_t> labels) const;

    [[nodiscard]] std::int32_t weight(std::uint32_t cls, std::size_t clause) const {
        return weights_.at(static_cast<std::size_t>(cls) * config_.n_clauses + clause);
    }
    void set_weight(std::uint32_t cls, std::size_t clause, std::int32_t w) {
        weights_.at(static_cast<std::size_t>(cls) * config_.n_clauses + clause) = w;
    }
    [[nodiscard]] std::uint16_t ta_state(std::size_t clause, std::uint32_t literal) const {
        return clauses_.at(clause).state.at(literal);
    }
    /// Forces a literal's state (testing and inspection).
    void set_ta_state(std::size_t clause, std::uint32_t literal, std::uint16_t state);
    [[nodiscard]] std::span<const std::uint32_t> included(std::size_t clause) const {
        return clauses_.at(clause).included;
    }
    [[nodiscard]] std::vector<std::uint64_t> literal_histogram() const;

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static TsetlinMachine load(std::istream& in);
    static TsetlinMachine load(const std::filesystem::path& path);

    bool operator==(const TsetlinMachine& other) const;

private:
    struct Clause {
        std::vector<std::uint16_t> state;
        std::vector<std::uint32_t> active;    // literals with state > 1
        std::vector<std::uint32_t> included;  // literals with state > ta_states

        bool operator==(const Clause&) const = default;
    };

    [[nodiscard]] bool literal_value(std::uint32_t literal, const BitVector& x) const noexcept {
        return literal < config_.n_features ? x.test(literal) : !x.test(literal - config_.n_features);
    }
    void check_input(const BitVector& x) const;
    void clause_outputs(const BitVector& x, bool training, std::vector<std::uint8_t>& out) const;

    void type_i(Clause& c, bool fired, const BitVector& x, Rng& rng);
    void type_ii(Clause& c, const BitVector& x, Rng& rng);
    void increment(Clause& c, std::uint32_t literal);
    /// Returns false when the literal dropped back to rest.
    bool decrement(Clause& c, std::uint32_t literal);

    TMConfig config_;
    std::vector<Clause> clauses_;
    std::vector<std::int32_t> weights_;  // [class][clause]

    // training scratch
    std::vector<std::uint8_t> fired_;
    std::vector<std::uint32_t> ones_;
};

}  // namespace microhd

#pragma once

// Microprice adjustment G*(I, S) estimated from top-of-book transitions.
//
// Units: mid changes and adjustments are in half ticks throughout, so the
// microprice in ticks is M + G*/2.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "microhd/book.hpp"

namespace microhd {

/// Top-of-book sizes kept exactly so that mirroring (I -> 1 - I) is exact.
struct Imbalance {
    std::int64_t bid_size = 0;
    std::int64_t ask_size = 0;

    [[nodiscard]] double value() const noexcept {
        return static_cast<double>(bid_size) / static_cast<double>(bid_size + ask_size);
    }
    [[nodiscard]] Imbalance mirrored() const noexcept { return {ask_size, bid_size}; }
    bool operator==(const Imbalance&) const = default;
};

struct Observation {
    Imbalance i_t;
    Ticks s_t = 1;
    Imbalance i_next;
    Ticks s_next = 1;
    std::int64_t dm = 0;  ///< half ticks, already clamped to +-2*k_max

    [[nodiscard]] Observation mirrored() const noexcept {
        return {i_t.mirrored(), s_t, i_next.mirrored(), s_next, -dm};
    }
    bool operator==(const Observation&) const = default;
};

/// (imbalance bucket, spread) grid. The bucket count must be odd so there is a
/// center bucket and mirroring maps buckets onto buckets exactly.
class StateGrid {
public:
    explicit StateGrid(std::size_t n_imbalance_buckets = 11, Ticks max_spread_ticks = 10);

    [[nodiscard]] std::size_t n_imbalance() const noexcept { return n_imb_; }
    [[nodiscard]] Ticks max_spread() const noexcept { return max_spread_; }
    [[nodiscard]] std::size_t n_states() const noexcept { return n_imb_ * static_cast<std::size_t>(max_spread_); }
    [[nodiscard]] std::size_t center_bucket() const noexcept { return (n_imb_ - 1) / 2; }

    [[nodiscard]] std::size_t bucket(Imbalance i) const;
    [[nodiscard]] std::size_t bucket(double i) const;
    /// Spreads outside 1..max_spread are clamped; `clamped` is set when that happens.
    [[nodiscard]] std::size_t index(std::size_t bucket, Ticks spread, bool* clamped = nullptr) const;
    [[nodiscard]] std::size_t index(Imbalance i, Ticks spread, bool* clamped = nullptr) const {
        return index(bucket(i), spread, clamped);
    }
    [[nodiscard]] std::size_t bucket_of(std::size_t state) const noexcept { return state % n_imb_; }
    [[nodiscard]] Ticks spread_of(std::size_t state) const noexcept {
        return static_cast<Ticks>(state / n_imb_) + 1;
    }
    /// State holding the mirrored imbalance at the same spread.
    [[nodiscard]] std::size_t mirror(std::size_t state) const noexcept {
        return state - bucket_of(state) + (n_imb_ - 1 - bucket_of(state));
    }

    bool operator==(const StateGrid&) const = default;

private:
    std::size_t n_imb_;
    Ticks max_spread_;
};

/// Mid-change support: -2k..-1, +1..+2k half ticks.
Eigen::VectorXd mid_change_support(int k_max);
/// Column of `dm` in the support, or -1 for dm = 0.
int mid_change_column(std::int64_t dm, int k_max) noexcept;

// --- Observation collection -------------------------------------------------

struct CollectStats {
    std::uint64_t events = 0;
    std::uint64_t top_changes = 0;
    std::uint64_t dm_clamped = 0;
};

/// Streams events through a book and emits one observation per top-of-book
/// change between two two-sided states. Events sharing a timestamp form one
/// update: the top is compared only once the whole group has been applied.
class ObservationCollector {
public:
    explicit ObservationCollector(int k_max = 2, BookConfig config = {});

    void apply(const OrderEvent& e);
    /// Ends the current timestamp group; returns the observation if the top changed.
    std::optional<Observation> close_group();

    [[nodiscard]] const BookState& book() const noexcept { return book_; }
    [[nodiscard]] const CollectStats& stats() const noexcept { return stats_; }

private:
    int k_max_;
    BookState book_;
    std::optional<TopOfBook> last_top_;
    CollectStats stats_;
};

/// Throws insufficient_data when fewer than `min_observations` are produced.
std::vector<Observation> collect_observations(std::span<const OrderEvent> events, int k_max = 2,
                                              BookConfig config = {}, std::size_t min_observations = 1,
                                              CollectStats* stats = nullptr);

/// Input followed by the mirror image of every input observation.
std::vector<Observation> symmetrize(std::span<const Observation> observations);

// --- Estimation -------------------------------------------------------------

/// Integer transition counts; merging shards is exact addition.
struct TransitionCounts {
    std::size_t n_states = 0;
    int k_max = 2;
    std::vector<std::uint64_t> visits;        // per state
    std::vector<std::uint64_t> no_change;     // n x n, row-major
    std::vector<std::uint64_t> change;        // n x n
    std::vector<std::uint64_t> by_dm;         // n x 4k

    TransitionCounts() = default;
    TransitionCounts(std::size_t n, int k);
    void add(std::size_t x, std::size_t y, std::int64_t dm);
    TransitionCounts& operator+=(const TransitionCounts& other);
};

TransitionCounts count_transitions(std::span<const Observation> observations, const StateGrid& grid, int k_max);

struct TransitionModel {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd T;
    Eigen::MatrixXd R;
    Eigen::VectorXd K;
    std::vector<bool> visited;

    [[nodiscard]] std::size_t n_states() const noexcept { return static_cast<std::size_t>(Q.rows()); }
    [[nodiscard]] std::size_t unvisited_count() const noexcept;
};

/// Frequency estimates. Unvisited states get Q = 0, a uniform T row and R = 0.
TransitionModel estimate_QTR(const TransitionCounts& counts);
TransitionModel estimate_QTR(std::span<const Observation> observations, const StateGrid& grid, int k_max);

/// Solves (I - Q) G1 = R K. Throws estimation_failure if I - Q is singular.
Eigen::VectorXd compute_G1(const TransitionModel& model);
/// Solves (I - Q) B = T.
Eigen::MatrixXd compute_B(const TransitionModel& model);

struct GstarResult {
    Eigen::VectorXd g_star;
    int iterations = 0;
    double residual = 0.0;                 ///< max-norm of the last increment
    std::vector<double> residual_history;  ///< ||B^i G1|| for i = 0..iterations
};

/// G* = sum_i B^i G1, stopping once the increment's max-norm drops below
/// epsilon. Throws diverged (with the last residual) after max_iters.
GstarResult compute_Gstar(const Eigen::VectorXd& g1, const Eigen::MatrixXd& B, double epsilon = 1e-8,
                          int max_iters = 200);

/// Closed form of the same sum: the solution x of (I - B) x = G1 with pi'x = 0,
/// pi the stationary law of B. nullopt when B has no unique stationary law.
std::optional<Eigen::VectorXd> closed_form_Gstar(const Eigen::VectorXd& g1, const Eigen::MatrixXd& B);

// --- Trained table ----------------------------------------------------------

struct MicropriceOptions {
    StateGrid grid{};
    int k_max = 2;
    double epsilon = 1e-8;
    int max_iters = 200;
    bool symmetrize = true;
};

class MicropriceTable {
public:
    MicropriceTable() = default;

    [[nodiscard]] const StateGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] int k_max() const noexcept { return k_max_; }
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
    [[nodiscard]] int iterations() const noexcept { return iterations_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }
    /// Max |iterative - closed form|, or nullopt if the closed form was not well posed.
    [[nodiscard]] std::optional<double> closed_form_gap() const noexcept { return closed_form_gap_; }
    [[nodiscard]] const Eigen::VectorXd& g_star() const noexcept { return g_star_; }
    [[nodiscard]] const Eigen::VectorXd& g1() const noexcept { return g1_; }
    [[nodiscard]] const Eigen::MatrixXd& B() const noexcept { return B_; }
    [[nodiscard]] const std::vector<bool>& visited() const noexcept { return visited_; }
    [[nodiscard]] std::uint64_t observations() const noexcept { return n_obs_; }
    [[nodiscard]] bool trained() const noexcept { return g_star_.size() > 0; }

    /// G* in half ticks for a state; spreads beyond the grid are clamped and counted.
    [[nodiscard]] double adjustment(Imbalance i, Ticks spread, std::uint64_t* clamped = nullptr) const;

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static MicropriceTable load(std::istream& in);
    static MicropriceTable load(const std::filesystem::path& path);

    bool operator==(const MicropriceTable& other) const;

    friend MicropriceTable train_microprice(std::span<const Observation>, const MicropriceOptions&);

private:
    StateGrid grid_;
    int k_max_ = 2;
    double epsilon_ = 1e-8;
    int max_iters_ = 200;
    int iterations_ = 0;
    double residual_ = 0.0;
    std::optional<double> closed_form_gap_;
    std::uint64_t n_obs_ = 0;
    Eigen::VectorXd g_star_;
    Eigen::VectorXd g1_;
    Eigen::MatrixXd B_;
    std::vector<bool> visited_;
};

/// Symmetrize (optionally), estimate, solve and sum.
MicropriceTable train_microprice(std::span<const Observation> observations, const MicropriceOptions& options = {});

/// M + G*/2 in ticks. nullopt for a one-sided book.
std::optional<double> micro_price(const BookState& book, const MicropriceTable& table,
                                  std::uint64_t* clamped = nullptr);
/// G*/2 in ticks for the book's current top, 0 for a one-sided book.
double microprice_adjustment_ticks(const BookState& book, const MicropriceTable& table,
                                   std::uint64_t* clamped = nullptr);

}  // namespace microhd

#include "microhd/microprice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace microhd {

StateGrid::StateGrid(std::size_t n_imbalance_buckets, Ticks max_spread_ticks)
    : n_imb_(n_imbalance_buckets), max_spread_(max_spread_ticks) {
    if (n_imb_ == 0 || n_imb_ % 2 == 0)
        throw Error(ErrorCode::invalid_argument, "imbalance bucket count must be odd, got " + std::to_string(n_imb_));
    if (max_spread_ < 1) throw Error(ErrorCode::invalid_argument, "max_spread_ticks must be >= 1");
}

std::size_t StateGrid::bucket(Imbalance i) const {
    const std::int64_t total = i.bid_size + i.ask_size;
    if (i.bid_size < 0 || i.ask_size < 0 || total <= 0)
        throw Error(ErrorCode::undefined_imbalance, "imbalance needs positive top volume");
    const auto n = static_cast<std::int64_t>(n_imb_);
    // Lower half counts up from 0, upper half counts down from n-1, so that
    // swapping the sides maps bucket k to n-1-k exactly.
    if (2 * i.bid_size < total) return static_cast<std::size_t>(n * i.bid_size / total);
    if (2 * i.bid_size > total) return static_cast<std::size_t>(n - 1 - n * i.ask_size / total);
    return center_bucket();
}

std::size_t StateGrid::bucket(double i) const {
    if (!(i >= 0.0 && i <= 1.0)) throw Error(ErrorCode::invalid_argument, "imbalance outside [0,1]");
    const double n = static_cast<double>(n_imb_);
    if (i < 0.5) return std::min(static_cast<std::size_t>(std::floor(i * n)), center_bucket());
    if (i > 0.5)
        return n_imb_ - 1 - std::min(static_cast<std::size_t>(std::floor((1.0 - i) * n)), center_bucket());
    return center_bucket();
}

std::size_t StateGrid::index(std::size_t b, Ticks spread, bool* clamped) const {
    const Ticks s = std::clamp<Ticks>(spread, 1, max_spread_);
    if (clamped) *clamped = s != spread;
    return static_cast<std::size_t>(s - 1) * n_imb_ + std::min(b, n_imb_ - 1);
}

Eigen::VectorXd mid_change_support(int k_max) {
    if (k_max < 1) throw Error(ErrorCode::invalid_argument, "k_max must be >= 1");
    Eigen::VectorXd k(4 * k_max);
    int c = 0;
    for (int v = -2 * k_max; v <= 2 * k_max; ++v)
        if (v != 0) k(c++) = v;
    return k;
}

int mid_change_column(std::int64_t dm, int k_max) noexcept {
    if (dm == 0 || dm < -2 * k_max || dm > 2 * k_max) return -1;
    return dm < 0 ? static_cast<int>(dm) + 2 * k_max : 2 * k_max + static_cast<int>(dm) - 1;
}

// --- collection ---------------------------------------------------------------

ObservationCollector::ObservationCollector(int k_max, BookConfig config) : k_max_(k_max), book_(config) {
    if (k_max < 1) throw Error(ErrorCode::invalid_argument, "k_max must be >= 1");
}

void ObservationCollector::apply(const OrderEvent& e) {
    ++stats_.events;
    book_.apply(e);
}

std::optional<Observation> ObservationCollector::close_group() {
    const auto top = top_of_book(book_);
    std::optional<Observation> out;
    if (top && last_top_ && *top != *last_top_) {
        ++stats_.top_changes;
        const std::int64_t raw = (top->bid_price + top->ask_price) - (last_top_->bid_price + last_top_->ask_price);
        const std::int64_t bound = 2 * static_cast<std::int64_t>(k_max_);
        const std::int64_t dm = std::clamp(raw, -bound, bound);
        if (dm != raw) ++stats_.dm_clamped;
        out = Observation{Imbalance{last_top_->bid_size, last_top_->ask_size},
                          last_top_->ask_price - last_top_->bid_price, Imbalance{top->bid_size, top->ask_size},
                          top->ask_price - top->bid_price, dm};
    }
    last_top_ = top;
    return out;
}

std::vector<Observation> collect_observations(std::span<const OrderEvent> events, int k_max, BookConfig config,
                                              std::size_t min_observations, CollectStats* stats) {
    ObservationCollector collector(k_max, config);
    std::vector<Observation> out;
    for (std::size_t i = 0; i < events.size(); ++i) {
        collector.apply(events[i]);
        if (i + 1 == events.size() || events[i + 1].ts_ns != events[i].ts_ns)
            if (auto o = collector.close_group()) out.push_back(*o);
    }
    if (stats) *stats = collector.stats();
    if (out.size() < min_observations)
        throw Error(ErrorCode::insufficient_data, "collected " + std::to_string(out.size()) +
                                                      " observations, need " + std::to_string(min_observations));
    return out;
}

std::vector<Observation> symmetrize(std::span<const Observation> observations) {
    std::vector<Observation> out(observations.begin(), observations.end());
    out.reserve(2 * observations.size());
    for (const auto& o : observations) out.push_back(o.mirrored());
    return out;
}

// --- estimation ---------------------------------------------------------------

TransitionCounts::TransitionCounts(std::size_t n, int k)
    : n_states(n), k_max(k), visits(n, 0), no_change(n * n, 0), change(n * n, 0),
      by_dm(n * static_cast<std::size_t>(4 * k), 0) {}

void TransitionCounts::add(std::size_t x, std::size_t y, std::int64_t dm) {
    ++visits[x];
    if (dm == 0) {
        ++no_change[x * n_states + y];
        return;
    }
    const int col = mid_change_column(dm, k_max);
    if (col < 0) throw Error(ErrorCode::invalid_argument, "mid change " + std::to_string(dm) + " outside support");
    ++change[x * n_states + y];
    ++by_dm[x * static_cast<std::size_t>(4 * k_max) + static_cast<std::size_t>(col)];
}

TransitionCounts& TransitionCounts::operator+=(const TransitionCounts& other) {
    if (other.n_states != n_states || other.k_max != k_max)
        throw Error(ErrorCode::dimension_mismatch, "cannot merge counts over different grids");
    auto merge = [](std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    merge(visits, other.visits);
    merge(no_change, other.no_change);
    merge(change, other.change);
    merge(by_dm, other.by_dm);
    return *this;
}

TransitionCounts count_transitions(std::span<const Observation> observations, const StateGrid& grid, int k_max) {
    TransitionCounts counts(grid.n_states(), k_max);
    for (const auto& o : observations)
        counts.add(grid.index(o.i_t, o.s_t), grid.index(o.i_next, o.s_next), o.dm);
    return counts;
}

std::size_t TransitionModel::unvisited_count() const noexcept {
    return static_cast<std::size_t>(std::count(visited.begin(), visited.end(), false));
}

TransitionModel estimate_QTR(const TransitionCounts& counts) {
    const auto n = static_cast<Eigen::Index>(counts.n_states);
    const auto nk = static_cast<Eigen::Index>(4 * counts.k_max);
    TransitionModel m;
    m.Q = Eigen::MatrixXd::Zero(n, n);
    m.T = Eigen::MatrixXd::Zero(n, n);
    m.R = Eigen::MatrixXd::Zero(n, nk);
    m.K = mid_change_support(counts.k_max);
    m.visited.assign(counts.n_states, false);
    for (Eigen::Index x = 0; x < n; ++x) {
        const auto total = counts.visits[static_cast<std::size_t>(x)];
        if (total == 0) {
            m.T.row(x).setConstant(1.0 / static_cast<double>(n));
            continue;
        }
        m.visited[static_cast<std::size_t>(x)] = true;
        const double t = static_cast<double>(total);
        for (Eigen::Index y = 0; y < n; ++y) {
            const auto idx = static_cast<std::size_t>(x * n + y);
            m.Q(x, y) = static_cast<double>(counts.no_change[idx]) / t;
            m.T(x, y) = static_cast<double>(counts.change[idx]) / t;
        }
        for (Eigen::Index k = 0; k < nk; ++k)
            m.R(x, k) = static_cast<double>(counts.by_dm[static_cast<std::size_t>(x * nk + k)]) / t;
    }
    return m;
}

TransitionModel estimate_QTR(std::span<const Observation> observations, const StateGrid& grid, int k_max) {
    return estimate_QTR(count_transitions(observations, grid, k_max));
}

namespace {

Eigen::PartialPivLU<Eigen::MatrixXd> factor_no_change(const TransitionModel& model) {
    const auto n = model.Q.rows();
    if (model.Q.cols() != n || model.T.rows() != n || model.R.rows() != n || model.R.cols() != model.K.size())
        throw Error(ErrorCode::dimension_mismatch, "inconsistent transition model shapes");
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - model.Q;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
    const double rcond = n == 0 ? 1.0 : lu.rcond();
    if (n > 0 && (!(rcond > 1e-13) || !(pivots.minCoeff() > 1e-13 * pivots.maxCoeff())))
        throw Error(ErrorCode::estimation_failure,
                    "I - Q is singular (reciprocal condition estimate " + std::to_string(rcond) + ")");
    return lu;
}

}  // namespace

Eigen::VectorXd compute_G1(const TransitionModel& model) {
    return factor_no_change(model).solve(model.R * model.K);
}

Eigen::MatrixXd compute_B(const TransitionModel& model) { return factor_no_change(model).solve(model.T); }

GstarResult compute_Gstar(const Eigen::VectorXd& g1, const Eigen::MatrixXd& B, double epsilon, int max_iters) {
    if (B.rows() != g1.size() || B.cols() != g1.size())
        throw Error(ErrorCode::dimension_mismatch, "B and G1 sizes differ");
    GstarResult r;
    r.g_star = g1;
    Eigen::VectorXd term = g1;
    r.residual = g1.size() ? term.lpNorm<Eigen::Infinity>() : 0.0;
    r.residual_history.push_back(r.residual);
    while (r.residual >= epsilon) {
        if (r.iterations >= max_iters)
            throw Error(ErrorCode::diverged, "G* did not converge in " + std::to_string(max_iters) +
                                                 " iterations, last residual " + std::to_string(r.residual));
        term = B * term;
        r.g_star += term;
        ++r.iterations;
        r.residual = term.lpNorm<Eigen::Infinity>();
        r.residual_history.push_back(r.residual);
    }
    return r;
}

std::optional<Eigen::VectorXd> closed_form_Gstar(const Eigen::VectorXd& g1, const Eigen::MatrixXd& B) {
    const auto n = B.rows();
    if (n == 0) return Eigen::VectorXd{};
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    // Stationary law: pi'(I - B) = 0 with one equation replaced by sum(pi) = 1.
    Eigen::MatrixXd a = (id - B).transpose();
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_pi(a);
    if (!lu_pi.isInvertible()) return std::nullopt;
    const Eigen::VectorXd pi = lu_pi.solve(rhs);
    const Eigen::MatrixXd m = id - B + Eigen::VectorXd::Ones(n) * pi.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (!lu.isInvertible()) return std::nullopt;
    return Eigen::VectorXd(lu.solve(g1));
}

// --- table ----------------------------------------------------------------------

MicropriceTable train_microprice(std::span<const Observation> observations, const MicropriceOptions& options) {
    if (observations.empty()) throw Error(ErrorCode::insufficient_data, "no observations to train on");
    std::vector<Observation> sym;
    std::span<const Observation> data = observations;
    if (options.symmetrize) {
        sym = symmetrize(observations);
        data = sym;
    }
    const TransitionModel model = estimate_QTR(data, options.grid, options.k_max);
    MicropriceTable t;
    t.grid_ = options.grid;
    t.k_max_ = options.k_max;
    t.epsilon_ = options.epsilon;
    t.max_iters_ = options.max_iters;
    t.n_obs_ = data.size();
    t.visited_ = model.visited;
    t.g1_ = compute_G1(model);
    t.B_ = compute_B(model);
    const GstarResult g = compute_Gstar(t.g1_, t.B_, options.epsilon, options.max_iters);
    t.g_star_ = g.g_star;
    t.iterations_ = g.iterations;
    t.residual_ = g.residual;
    if (auto cf = closed_form_Gstar(t.g1_, t.B_)) t.closed_form_gap_ = (*cf - t.g_star_).lpNorm<Eigen::Infinity>();
    return t;
}

double MicropriceTable::adjustment(Imbalance i, Ticks spread, std::uint64_t* clamped) const {
    if (!trained()) throw Error(ErrorCode::untrained_model, "microprice table is empty");
    bool was_clamped = false;
    const std::size_t x = grid_.index(i, spread, &was_clamped);
    if (was_clamped && clamped) ++*clamped;
    return g_star_(static_cast<Eigen::Index>(x));
}

bool MicropriceTable::operator==(const MicropriceTable& o) const {
    auto same = [](const auto& a, const auto& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
    };
    return grid_ == o.grid_ && k_max_ == o.k_max_ && epsilon_ == o.epsilon_ && max_iters_ == o.max_iters_ &&
           iterations_ == o.iterations_ && residual_ == o.residual_ && closed_form_gap_ == o.closed_form_gap_ &&
           n_obs_ == o.n_obs_ && visited_ == o.visited_ && same(g_star_, o.g_star_) && same(g1_, o.g1_) &&
           same(B_, o.B_);
}

namespace {
constexpr const char* kTableMagic = "microhd-microprice";
constexpr int kTableVersion = 1;

template <typename T>
T read_field(std::istream& in, const char* name) {
    std::string key;
    T value{};
    if (!(in >> key >> value) || key != name)
        throw Error(ErrorCode::parse_error, std::string("microprice table: expected field '") + name + "'");
    return value;
}

double read_hex(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) throw Error(ErrorCode::parse_error, "microprice table: truncated");
    return parse_hexfloat(tok);
}
}  // namespace

void MicropriceTable::save(std::ostream& out) const {
    if (!trained()) throw Error(ErrorCode::untrained_model, "microprice table is empty");
    const auto n = static_cast<Eigen::Index>(grid_.n_states());
    out << kTableMagic << ' ' << kTableVersion << '\n'
        << "n_imbalance " << grid_.n_imbalance() << '\n'
        << "max_spread " << grid_.max_spread() << '\n'
        << "k_max " << k_max_ << '\n'
        << "epsilon " << hexfloat(epsilon_) << '\n'
        << "max_iters " << max_iters_ << '\n'
        << "iterations " << iterations_ << '\n'
        << "residual " << hexfloat(residual_) << '\n'
        << "closed_form_gap " << (closed_form_gap_ ? hexfloat(*closed_form_gap_) : std::string("none")) << '\n'
        << "observations " << n_obs_ << '\n'
        << "states " << n << '\n'
        << "# state spread bucket visited g_star_half_ticks g1\n";
    for (Eigen::Index x = 0; x < n; ++x) {
        const auto s = static_cast<std::size_t>(x);
        out << x << ' ' << grid_.spread_of(s) << ' ' << grid_.bucket_of(s) << ' ' << (visited_[s] ? 1 : 0) << ' '
            << hexfloat(g_star_(x)) << ' ' << hexfloat(g1_(x)) << '\n';
    }
    out << "# B rows\n";
    for (Eigen::Index x = 0; x < n; ++x) {
        for (Eigen::Index y = 0; y < n; ++y) out << (y ? " " : "") << hexfloat(B_(x, y));
        out << '\n';
    }
}

void MicropriceTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    save(out);
}

MicropriceTable MicropriceTable::load(std::istream& raw) {
    // Strip comment lines first so the field reader stays simple.
    std::stringstream in;
    for (std::string line; std::getline(raw, line);)
        if (line.empty() || line.front() != '#') in << line << '\n';
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kTableMagic)
        throw Error(ErrorCode::parse_error, "not a microprice table file");
    if (version != kTableVersion)
        throw Error(ErrorCode::parse_error, "unsupported microprice table version " + std::to_string(version));
    MicropriceTable t;
    const auto n_imb = read_field<std::size_t>(in, "n_imbalance");
    const auto max_spread = read_field<Ticks>(in, "max_spread");
    t.grid_ = StateGrid(n_imb, max_spread);
    t.k_max_ = read_field<int>(in, "k_max");
    t.epsilon_ = parse_hexfloat(read_field<std::string>(in, "epsilon"));
    t.max_iters_ = read_field<int>(in, "max_iters");
    t.iterations_ = read_field<int>(in, "iterations");
    t.residual_ = parse_hexfloat(read_field<std::string>(in, "residual"));
    if (const auto gap = read_field<std::string>(in, "closed_form_gap"); gap != "none")
        t.closed_form_gap_ = parse_hexfloat(gap);
    t.n_obs_ = read_field<std::uint64_t>(in, "observations");
    const auto n = read_field<Eigen::Index>(in, "states");
    if (n != static_cast<Eigen::Index>(t.grid_.n_states()))
        throw Error(ErrorCode::parse_error, "state count does not match the grid");
    t.g_star_.resize(n);
    t.g1_.resize(n);
    t.visited_.assign(static_cast<std::size_t>(n), false);
    for (Eigen::Index x = 0; x < n; ++x) {
        Eigen::Index idx = 0;
        Ticks spread = 0;
        std::size_t bucket = 0;
        int visited = 0;
        if (!(in >> idx >> spread >> bucket >> visited) || idx != x)
            throw Error(ErrorCode::parse_error, "bad state record " + std::to_string(x));
        t.visited_[static_cast<std::size_t>(x)] = visited != 0;
        t.g_star_(x) = read_hex(in);
        t.g1_(x) = read_hex(in);
    }
    t.B_.resize(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y) t.B_(x, y) = read_hex(in);
    return t;
}

MicropriceTable MicropriceTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return load(in);
}

std::optional<double> micro_price(const BookState& book, const MicropriceTable& table, std::uint64_t* clamped) {
    const auto top = top_of_book(book);
    if (!top) return std::nullopt;
    const double g = table.adjustment(Imbalance{top->bid_size, top->ask_size}, top->ask_price - top->bid_price, clamped);
    return MidPrice{top->bid_price + top->ask_price}.ticks() + g / 2.0;
}

double microprice_adjustment_ticks(const BookState& book, const MicropriceTable& table, std::uint64_t* clamped) {
    const auto top = top_of_book(book);
    if (!top) return 0.0;
    return table.adjustment(Imbalance{top->bid_size, top->ask_size}, top->ask_price - top->bid_price, clamped) / 2.0;
}

}  // namespace microhd

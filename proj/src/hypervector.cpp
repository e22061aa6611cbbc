#include "microhd/hypervector.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace microhd {

namespace {

void require_same_shape(const SparseHypervector& a, const SparseHypervector& b, const char* op) {
    if (a.shape() != b.shape())
        throw Error(ErrorCode::dimension_mismatch,
                    std::string(op) + ": shapes " + std::to_string(a.n_segments()) + "x" +
                        std::to_string(a.segment_len()) + " and " + std::to_string(b.n_segments()) + "x" +
                        std::to_string(b.segment_len()));
}

std::uint64_t tie_priority(std::uint64_t stream, std::uint64_t segment, std::uint64_t index) noexcept {
    return splitmix64(stream ^ splitmix64((segment << 16) | index));
}

}  // namespace

SparseHypervector::SparseHypervector(HvShape shape)
    : segment_len_(shape.segment_len), idx_(shape.n_segments, kEmpty) {
    if (shape.segment_len == 0 || shape.segment_len >= kEmpty)
        throw Error(ErrorCode::invalid_argument, "segment_len must be in [1, 65534]");
}

SparseHypervector::SparseHypervector(std::uint32_t segment_len, std::vector<Index> indices)
    : segment_len_(segment_len), idx_(std::move(indices)) {
    if (segment_len_ == 0 || segment_len_ >= kEmpty)
        throw Error(ErrorCode::invalid_argument, "segment_len must be in [1, 65534]");
    if (!valid()) throw Error(ErrorCode::invalid_argument, "segment index out of range");
}

void SparseHypervector::set(std::size_t s, Index i) {
    if (i != kEmpty && i >= segment_len_) throw Error(ErrorCode::invalid_argument, "segment index out of range");
    idx_.at(s) = i;
}

bool SparseHypervector::full() const noexcept {
    return std::none_of(idx_.begin(), idx_.end(), [](Index i) { return i == kEmpty; });
}

bool SparseHypervector::valid() const noexcept {
    return std::all_of(idx_.begin(), idx_.end(), [this](Index i) { return i == kEmpty || i < segment_len_; });
}

SparseHypervector random_hv(Rng& rng, HvShape shape) {
    SparseHypervector v(shape);
    for (std::uint32_t s = 0; s < shape.n_segments; ++s)
        v.set(s, static_cast<SparseHypervector::Index>(uniform_below(rng, shape.segment_len)));
    return v;
}

SparseHypervector bind(const SparseHypervector& key, const SparseHypervector& value) {
    require_same_shape(key, value, "bind");
    if (!key.full()) throw Error(ErrorCode::invalid_argument, "bind: key has empty segments");
    const std::uint32_t len = key.segment_len();
    SparseHypervector out(key.shape());
    for (std::uint32_t s = 0; s < key.n_segments(); ++s) {
        const auto w = value[s];
        if (w != SparseHypervector::kEmpty) out.set(s, static_cast<SparseHypervector::Index>((w + key[s]) % len));
    }
    return out;
}

SparseHypervector inverse(const SparseHypervector& key) {
    const std::uint32_t len = key.segment_len();
    SparseHypervector out(key.shape());
    for (std::uint32_t s = 0; s < key.n_segments(); ++s) {
        const auto k = key[s];
        if (k != SparseHypervector::kEmpty) out.set(s, static_cast<SparseHypervector::Index>((len - k) % len));
    }
    return out;
}

SparseHypervector unbind(const SparseHypervector& key, const SparseHypervector& bound) {
    return bind(inverse(key), bound);
}

SparseHypervector permute(const SparseHypervector& v, std::uint64_t j) {
    const std::uint32_t n = v.n_segments();
    SparseHypervector out(v.shape());
    if (n == 0) return out;
    const std::uint64_t shift = j % n;
    for (std::uint32_t r = 0; r < n; ++r) out.set(r, v[(r + n - shift) % n]);
    return out;
}

double similarity(const SparseHypervector& v, const SparseHypervector& w) {
    require_same_shape(v, w, "similarity");
    if (v.n_segments() == 0) return 0.0;
    std::size_t same = 0;
    for (std::uint32_t s = 0; s < v.n_segments(); ++s)
        same += (v[s] != SparseHypervector::kEmpty && v[s] == w[s]) ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(v.n_segments());
}

void bundle_into(std::span<const SparseHypervector* const> vectors, TieBreak tie, SparseHypervector& out) {
    if (vectors.empty()) throw Error(ErrorCode::invalid_argument, "bundle of zero vectors");
    const HvShape shape = vectors.front()->shape();
    for (const auto* v : vectors)
        if (v->shape() != shape) throw Error(ErrorCode::dimension_mismatch, "bundle: mixed shapes");
    if (out.shape() != shape) out = SparseHypervector(shape);
    const std::uint64_t stream = mix_seed(tie.seed, tie.counter);
    constexpr std::size_t kMaxInline = 64;
    std::array<SparseHypervector::Index, kMaxInline> seen{};
    std::array<std::uint32_t, kMaxInline> votes{};
    std::vector<SparseHypervector::Index> seen_heap;
    std::vector<std::uint32_t> votes_heap;
    const bool inline_ok = vectors.size() <= kMaxInline;
    if (!inline_ok) {
        seen_heap.resize(vectors.size());
        votes_heap.resize(vectors.size());
    }
    SparseHypervector::Index* seen_p = inline_ok ? seen.data() : seen_heap.data();
    std::uint32_t* votes_p = inline_ok ? votes.data() : votes_heap.data();

    for (std::uint32_t s = 0; s < shape.n_segments; ++s) {
        std::size_t distinct = 0;
        for (const auto* v : vectors) {
            const auto i = (*v)[s];
            if (i == SparseHypervector::kEmpty) continue;
            std::size_t k = 0;
            while (k < distinct && seen_p[k] != i) ++k;
            if (k == distinct) {
                seen_p[distinct] = i;
                votes_p[distinct] = 0;
                ++distinct;
            }
            ++votes_p[k];
        }
        if (distinct == 0) {
            out.set(s, SparseHypervector::kEmpty);
            continue;
        }
        std::size_t best = 0;
        std::uint64_t best_priority = 0;
        bool priority_known = false;
        for (std::size_t k = 1; k < distinct; ++k) {
            if (votes_p[k] < votes_p[best]) continue;
            if (votes_p[k] > votes_p[best]) {
                best = k;
                priority_known = false;
                continue;
            }
            if (!priority_known) {
                best_priority = tie_priority(stream, s, seen_p[best]);
                priority_known = true;
            }
            const std::uint64_t p = tie_priority(stream, s, seen_p[k]);
            if (p > best_priority) {
                best = k;
                best_priority = p;
            }
        }
        out.set(s, seen_p[best]);
    }
}

SparseHypervector bundle(std::span<const SparseHypervector* const> vectors, TieBreak tie) {
    if (vectors.empty()) throw Error(ErrorCode::invalid_argument, "bundle of zero vectors");
    SparseHypervector out(vectors.front()->shape());
    bundle_into(vectors, tie, out);
    return out;
}

SparseHypervector bundle(std::span<const SparseHypervector> vectors, TieBreak tie) {
    std::vector<const SparseHypervector*> ptrs;
    ptrs.reserve(vectors.size());
    for (const auto& v : vectors) ptrs.push_back(&v);
    return bundle(std::span<const SparseHypervector* const>(ptrs), tie);
}

// --- codebook -------------------------------------------------------------------

Codebook::Codebook(std::uint64_t seed, HvShape shape) : seed_(seed), shape_(shape) {
    if (shape.n_segments == 0 || shape.segment_len < 2)
        throw Error(ErrorCode::invalid_argument, "codebook shape needs >= 1 segment of length >= 2");
}

Codebook::Codebook(const Codebook& other) : seed_(other.seed_), shape_(other.shape_) {
    std::lock_guard lock(other.mutex_);
    entries_ = other.entries_;
}

Codebook& Codebook::operator=(const Codebook& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    seed_ = other.seed_;
    shape_ = other.shape_;
    entries_ = other.entries_;
    return *this;
}

SparseHypervector Codebook::derive(std::uint64_t seed, HvShape shape, SymbolDomain domain, std::int64_t symbol) {
    Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(domain)), static_cast<std::uint64_t>(symbol)));
    return random_hv(rng, shape);
}

const SparseHypervector& Codebook::get(SymbolDomain domain, std::int64_t symbol) const {
    std::lock_guard lock(mutex_);
    const Key key{static_cast<std::uint8_t>(domain), symbol};
    auto it = entries_.find(key);
    if (it == entries_.end()) it = entries_.emplace(key, derive(seed_, shape_, domain, symbol)).first;
    return it->second;
}

std::size_t Codebook::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void Codebook::save(std::ostream& out) const {
    std::lock_guard lock(mutex_);
    out << "microhd-codebook 1\n"
        << "seed " << seed_ << '\n'
        << "shape " << shape_.n_segments << ' ' << shape_.segment_len << '\n'
        << "entries " << entries_.size() << '\n';
    for (const auto& [key, v] : entries_) {
        out << static_cast<int>(key.first) << ' ' << key.second;
        for (auto i : v.indices()) out << ' ' << i;
        out << '\n';
    }
}

void Codebook::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    save(out);
}

Codebook Codebook::load(std::istream& in) {
    std::string magic, word;
    int version = 0;
    std::uint64_t seed = 0;
    HvShape shape;
    std::size_t n = 0;
    if (!(in >> magic >> version) || magic != "microhd-codebook" || version != 1)
        throw Error(ErrorCode::parse_error, "not a version 1 codebook file");
    if (!(in >> word >> seed) || word != "seed") throw Error(ErrorCode::parse_error, "codebook: missing seed");
    if (!(in >> word >> shape.n_segments >> shape.segment_len) || word != "shape")
        throw Error(ErrorCode::parse_error, "codebook: missing shape");
    if (!(in >> word >> n) || word != "entries") throw Error(ErrorCode::parse_error, "codebook: missing entry count");
    Codebook book(seed, shape);
    for (std::size_t e = 0; e < n; ++e) {
        int domain = 0;
        std::int64_t symbol = 0;
        if (!(in >> domain >> symbol)) throw Error(ErrorCode::parse_error, "codebook: truncated entry");
        std::vector<SparseHypervector::Index> idx(shape.n_segments);
        for (auto& i : idx) {
            unsigned v = 0;
            if (!(in >> v)) throw Error(ErrorCode::parse_error, "codebook: truncated index array");
            i = static_cast<SparseHypervector::Index>(v);
        }
        book.entries_.emplace(Key{static_cast<std::uint8_t>(domain), symbol},
                              SparseHypervector(shape.segment_len, std::move(idx)));
    }
    return book;
}

Codebook Codebook::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return load(in);
}

}  // namespace microhd

#pragma once

// Sparse segmented binary hypervectors: at most one set bit per segment, held
// as one index per segment.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "microhd/common.hpp"

namespace microhd {

struct HvShape {
    std::uint32_t n_segments = 256;
    std::uint32_t segment_len = 32;

    [[nodiscard]] std::size_t dimension() const noexcept {
        return static_cast<std::size_t>(n_segments) * segment_len;
    }
    bool operator==(const HvShape&) const = default;
};

class SparseHypervector {
public:
    using Index = std::uint16_t;
    static constexpr Index kEmpty = 0xFFFF;

    SparseHypervector() = default;
    /// All segments empty.
    explicit SparseHypervector(HvShape shape);
    SparseHypervector(std::uint32_t segment_len, std::vector<Index> indices);

    [[nodiscard]] HvShape shape() const noexcept {
        return {static_cast<std::uint32_t>(idx_.size()), segment_len_};
    }
    [[nodiscard]] std::uint32_t n_segments() const noexcept { return static_cast<std::uint32_t>(idx_.size()); }
    [[nodiscard]] std::uint32_t segment_len() const noexcept { return segment_len_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return shape().dimension(); }

    [[nodiscard]] Index operator[](std::size_t s) const noexcept { return idx_[s]; }
    void set(std::size_t s, Index i);
    [[nodiscard]] std::span<const Index> indices() const noexcept { return idx_; }

    /// True when every segment holds an index.
    [[nodiscard]] bool full() const noexcept;
    /// True when every index is empty or below segment_len.
    [[nodiscard]] bool valid() const noexcept;

    bool operator==(const SparseHypervector&) const = default;

private:
    std::uint32_t segment_len_ = 0;
    std::vector<Index> idx_;
};

/// One uniformly chosen index per segment.
SparseHypervector random_hv(Rng& rng, HvShape shape = {});

/// Rotates each segment of `value` by the index held in `key`:
/// result index = (value + key) mod segment_len. `key` must be full.
SparseHypervector bind(const SparseHypervector& key, const SparseHypervector& value);
/// Segment-wise inverse indices, (segment_len - i) mod segment_len.
SparseHypervector inverse(const SparseHypervector& key);
/// bind(inverse(key), bound).
SparseHypervector unbind(const SparseHypervector& key, const SparseHypervector& bound);

/// Rotates the segment order: result segment r = v[(r - j) mod n_segments].
SparseHypervector permute(const SparseHypervector& v, std::uint64_t j);

/// Fraction of segments where both vectors hold the same index.
double similarity(const SparseHypervector& v, const SparseHypervector& w);

/// Seeds the choice among indices tied for the most votes. The winner is the
/// tied index with the largest hash of (seed, counter, segment, index), so a
/// bundle depends only on its inputs and this pair.
struct TieBreak {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;
};

/// Per-segment majority vote. Throws invalid_argument on empty input.
SparseHypervector bundle(std::span<const SparseHypervector> vectors, TieBreak tie = {});
SparseHypervector bundle(std::span<const SparseHypervector* const> vectors, TieBreak tie = {});
/// Allocation-free variant used on the encoding hot path. `out` must already
/// have the inputs' shape.
void bundle_into(std::span<const SparseHypervector* const> vectors, TieBreak tie, SparseHypervector& out);

/// Symbol namespaces of a codebook.
enum class SymbolDomain : std::uint8_t { unit_level = 0, tick = 1, rank = 2 };

/// Seeded symbol -> vector map. Vectors are derived from (seed, domain, symbol)
/// alone and are generated on first use under a lock.
class Codebook {
public:
    explicit Codebook(std::uint64_t seed = 0, HvShape shape = {});

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] HvShape shape() const noexcept { return shape_; }

    const SparseHypervector& get(SymbolDomain domain, std::int64_t symbol) const;
    /// Vector for (seed, domain, symbol) without touching the cache.
    static SparseHypervector derive(std::uint64_t seed, HvShape shape, SymbolDomain domain, std::int64_t symbol);

    [[nodiscard]] std::size_t size() const;

    /// Flat text export of every populated entry.
    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static Codebook load(std::istream& in);
    static Codebook load(const std::filesystem::path& path);

    Codebook(const Codebook& other);
    Codebook& operator=(const Codebook& other);

private:
    using Key = std::pair<std::uint8_t, std::int64_t>;

    std::uint64_t seed_;
    HvShape shape_;
    mutable std::mutex mutex_;
    mutable std::map<Key, SparseHypervector> entries_;
};

}  // namespace microhd

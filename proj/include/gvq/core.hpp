#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvq {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Invalid argument to an operation (bad k, empty store, ...).
struct ParameterError : Error {
    using Error::Error;
};
// Precondition violated by the caller (dimension mismatch, id out of range).
struct ContractError : Error {
    using Error::Error;
};
// Unreadable or corrupt on-disk data.
struct FormatError : Error {
    using Error::Error;
};
// File decoded fine but its parts disagree with each other.
struct IntegrityError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

inline constexpr std::uint32_t kInvalidId = std::numeric_limits<std::uint32_t>::max();

/// Squared Euclidean distance between two d-dimensional f32 vectors,
/// accumulated in f64. Eight independent accumulators keep the summation
/// order fixed and let the compiler vectorize without -ffast-math.
inline double squared_l2(const float* __restrict a, const float* __restrict b, std::size_t d) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    double acc4 = 0.0, acc5 = 0.0, acc6 = 0.0, acc7 = 0.0;
    std::size_t i = 0;
    for (; i + 8 <= d; i += 8) {
        const double d0 = static_cast<double>(a[i + 0]) - static_cast<double>(b[i + 0]);
        const double d1 = static_cast<double>(a[i + 1]) - static_cast<double>(b[i + 1]);
        const double d2 = static_cast<double>(a[i + 2]) - static_cast<double>(b[i + 2]);
        const double d3 = static_cast<double>(a[i + 3]) - static_cast<double>(b[i + 3]);
        const double d4 = static_cast<double>(a[i + 4]) - static_cast<double>(b[i + 4]);
        const double d5 = static_cast<double>(a[i + 5]) - static_cast<double>(b[i + 5]);
        const double d6 = static_cast<double>(a[i + 6]) - static_cast<double>(b[i + 6]);
        const double d7 = static_cast<double>(a[i + 7]) - static_cast<double>(b[i + 7]);
        acc0 += d0 * d0;
        acc1 += d1 * d1;
        acc2 += d2 * d2;
        acc3 += d3 * d3;
        acc4 += d4 * d4;
        acc5 += d5 * d5;
        acc6 += d6 * d6;
        acc7 += d7 * d7;
    }
    for (; i < d; ++i) {
        const double dd = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc0 += dd * dd;
    }
    return ((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7));
}

inline double squared_l2(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw ContractError("squared_l2: dimension mismatch");
    return squared_l2(a.data(), b.data(), a.size());
}

inline double l2(std::span<const float> a, std::span<const float> b) {
    return std::sqrt(squared_l2(a, b));
}

/// Dense d-dimensional f32 vectors, row-major, id-addressed 0..n-1.
/// Immutable after construction as far as searches are concerned; safe to
/// share across concurrent queries.
class VectorStore {
  public:
    VectorStore() = default;
    explicit VectorStore(std::uint32_t dim) : dim_(dim) {
        if (dim == 0)
            throw ParameterError("VectorStore: dim must be positive");
    }
    VectorStore(std::uint32_t dim, std::vector<float> data) : VectorStore(dim) {
        if (data.size() % dim != 0)
            throw ContractError("VectorStore: data size not a multiple of dim");
        for (float v : data)
            if (!std::isfinite(v))
                throw ContractError("VectorStore: non-finite component");
        data_ = std::move(data);
    }

    std::uint32_t dim() const { return dim_; }
    std::uint32_t size() const { return static_cast<std::uint32_t>(data_.size() / dim_); }
    bool empty() const { return data_.empty(); }

    std::span<const float> operator[](std::uint32_t id) const {
        return {data_.data() + static_cast<std::size_t>(id) * dim_, dim_};
    }
    std::span<const float> at(std::uint32_t id) const {
        if (id >= size())
            throw ContractError("VectorStore: id out of range");
        return (*this)[id];
    }
    const float* raw() const { return data_.data(); }

    void append(std::span<const float> v) {
        if (v.size() != dim_)
            throw ContractError("VectorStore::append: dimension mismatch");
        for (float x : v)
            if (!std::isfinite(x))
                throw ContractError("VectorStore::append: non-finite component");
        data_.insert(data_.end(), v.begin(), v.end());
    }
    void reserve(std::uint32_t count) { data_.reserve(static_cast<std::size_t>(count) * dim_); }

    bool operator==(const VectorStore&) const = default;

    void save(const std::filesystem::path& path) const;
    static VectorStore load(const std::filesystem::path& path);

  private:
    std::uint32_t dim_ = 0;
    std::vector<float> data_;
};

/// Counts exact distance evaluations for one in-flight query. Each store id
/// is charged at most once per query; repeat lookups hit the memo. Single
/// owner, never shared between queries.
class DistanceMeter {
  public:
    void begin_query() {
        if (++epoch_ == 0) { // stamp wrap: invalidate everything
            std::fill(stamps_.begin(), stamps_.end(), 0u);
            epoch_ = 1;
        }
    }

    /// Distance plus whether this call actually evaluated (memo miss).
    std::pair<double, bool> measure(const VectorStore& store, std::uint32_t id,
                                    std::span<const float> q) {
        if (q.size() != store.dim())
            throw ContractError("DistanceMeter: query dimension mismatch");
        if (id >= store.size())
            throw ContractError("DistanceMeter: id out of range");
        if (stamps_.size() < store.size()) {
            stamps_.resize(store.size(), 0u);
            memo_.resize(store.size());
        }
        if (stamps_[id] == epoch_)
            return {memo_[id], false};
        const double d = std::sqrt(squared_l2(store[id].data(), q.data(), q.size()));
        stamps_[id] = epoch_;
        memo_[id] = d;
        ++evaluations_;
        return {d, true};
    }

    std::uint64_t evaluations() const { return evaluations_; }

  private:
    std::uint64_t evaluations_ = 0;
    std::uint32_t epoch_ = 1;
    std::vector<std::uint32_t> stamps_;
    std::vector<double> memo_;
};

/// Metered Euclidean distance from stored vector `id` to query `q`.
inline double distance(DistanceMeter& meter, const VectorStore& store, std::uint32_t id,
                       std::span<const float> q) {
    return meter.measure(store, id, q).first;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

/// Seeded deterministic generator. mt19937_64 core (bit-exact across
/// platforms by the standard); bounded/real/gaussian draws are implemented
/// here rather than with std distributions, whose algorithms are
/// implementation-defined. derive() splits off an independent stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next() { return gen_(); }

    /// Unbiased draw in [0, n), by rejection.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0)
            throw ParameterError("Rng::bounded: empty range");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold)
                return r % n;
        }
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (std::normal_distribution is not
    /// portable across standard libraries).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 == 0.0)
            u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Independent child stream; deterministic in (seed, stream).
    Rng derive(std::uint64_t stream) const {
        return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream)));
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Node id drawn uniformly from a store of n vectors.
inline std::uint32_t uniform_node(Rng& rng, std::uint32_t n) {
    if (n == 0)
        throw ParameterError("uniform_node: empty store");
    return static_cast<std::uint32_t>(rng.bounded(n));
}

// ---------------------------------------------------------------------------
// Little-endian binary encoding. All file formats use these helpers so the
// containers are bit-exact regardless of host endianness.

namespace detail {

class Writer {
  public:
    explicit Writer(const std::filesystem::path& path)
        : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_)
            throw IoError("cannot open for writing: " + path.string());
    }
    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_)
            throw IoError("write failed");
    }
    void magic(const char tag[5]) { bytes(tag, 4); }
    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i)
            b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i)
            b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 8);
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f32_array(const float* p, std::size_t n) {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(p, n * sizeof(float));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                f32(p[i]);
        }
    }

  private:
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_)
            throw IoError("cannot open for reading: " + path.string());
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError("truncated file");
    }
    void magic(const char tag[5]) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, tag, 4) != 0)
            throw FormatError(std::string("bad magic, expected ") + tag);
    }
    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        unsigned char b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void f32_array(float* p, std::size_t n) {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(p, n * sizeof(float));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                p[i] = f32();
        }
    }
    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

  private:
    std::ifstream in_;
};

} // namespace detail

// Vector container: "GVQ1", u32 dim, u64 count, count*dim little-endian f32.
inline void VectorStore::save(const std::filesystem::path& path) const {
    detail::Writer w(path);
    w.magic("GVQ1");
    w.u32(dim_);
    w.u64(size());
    w.f32_array(data_.data(), data_.size());
}

inline VectorStore VectorStore::load(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.magic("GVQ1");
    const std::uint32_t dim = r.u32();
    const std::uint64_t count = r.u64();
    if (dim == 0)
        throw FormatError("GVQ1: zero dimension");
    if (count > std::numeric_limits<std::uint32_t>::max())
        throw FormatError("GVQ1: count exceeds supported range");
    std::vector<float> data(static_cast<std::size_t>(count) * dim);
    r.f32_array(data.data(), data.size());
    for (float v : data)
        if (!std::isfinite(v))
            throw FormatError("GVQ1: non-finite component");
    VectorStore s(dim);
    s.data_ = std::move(data);
    return s;
}

} // namespace gvq

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bgl {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

/// Raised when a byte stream cannot be decoded.
struct CodecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when an operation references a node digest that is not resolvable.
struct UnresolvedRef : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string to_hex(ByteSpan data);
Bytes from_hex(const std::string& hex);

/// Dense bit set sized at construction. Used for ancestry masks, where
/// bit i corresponds to the node with storage index i.
class Bitset {
public:
    Bitset() = default;
    explicit Bitset(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

    std::size_t size() const { return bits_; }

    void resize(std::size_t bits)
    {
        bits_ = bits;
        words_.resize((bits + 63) / 64, 0);
    }

    bool test(std::size_t i) const
    {
        if (i >= bits_) return false;
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }

    void set(std::size_t i)
    {
        if (i >= bits_) resize(i + 1);
        words_[i >> 6] |= std::uint64_t{1} << (i & 63);
    }

    void clear(std::size_t i)
    {
        if (i < bits_) words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
    }

    Bitset& operator|=(const Bitset& other)
    {
        if (other.bits_ > bits_) resize(other.bits_);
        for (std::size_t w = 0; w < other.words_.size(); ++w) words_[w] |= other.words_[w];
        return *this;
    }

    std::size_t count() const
    {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(__builtin_popcountll(w));
        return n;
    }

    /// True if every set bit of this is also set in `other`.
    bool subset_of(const Bitset& other) const
    {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t rhs = w < other.words_.size() ? other.words_[w] : 0;
            if (words_[w] & ~rhs) return false;
        }
        return true;
    }

    bool intersects(const Bitset& other) const
    {
        std::size_t n = std::min(words_.size(), other.words_.size());
        for (std::size_t w = 0; w < n; ++w)
            if (words_[w] & other.words_[w]) return true;
        return false;
    }

    template <typename Fn>
    void for_each(Fn&& fn) const
    {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t word = words_[w];
            while (word) {
                unsigned bit = static_cast<unsigned>(__builtin_ctzll(word));
                fn(w * 64 + bit);
                word &= word - 1;
            }
        }
    }

    bool operator==(const Bitset&) const = default;

private:
    std::size_t bits_ = 0;
    std::vector<std::uint64_t> words_;
};

/// splitmix64: tiny deterministic PRNG. std::uniform_int_distribution is
/// implementation-defined, so every random draw in the project goes through
/// this to keep traces byte-identical across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform draw in [lo, hi] via modulo reduction; bias is irrelevant for
    /// simulation scheduling and modulo keeps the draw platform-independent.
    std::uint64_t range(std::uint64_t lo, std::uint64_t hi)
    {
        if (hi <= lo) return lo;
        return lo + next() % (hi - lo + 1);
    }

private:
    std::uint64_t state_;
};

} // namespace bgl

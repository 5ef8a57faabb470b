#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace coopbandit {

/// Fixed-size dynamic bitset backed by 64-bit words. Used for adjacency rows
/// and candidate sets in the independence-number search.
class Bitset {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    Bitset() = default;
    explicit Bitset(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

    std::size_t size() const noexcept { return size_; }

    void set(std::size_t i) noexcept { words_[i >> 6] |= (std::uint64_t{1} << (i & 63)); }
    void reset(std::size_t i) noexcept { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
    bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }

    void set_all() noexcept
    {
        for (auto& w : words_) {
            w = ~std::uint64_t{0};
        }
        trim();
    }

    bool any() const noexcept
    {
        for (auto w : words_) {
            if (w != 0) {
                return true;
            }
        }
        return false;
    }

    std::size_t count() const noexcept
    {
        std::size_t c = 0;
        for (auto w : words_) {
            c += static_cast<std::size_t>(std::popcount(w));
        }
        return c;
    }

    /// Index of the lowest set bit, or npos.
    std::size_t first() const noexcept
    {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            if (words_[k] != 0) {
                return k * 64 + static_cast<std::size_t>(std::countr_zero(words_[k]));
            }
        }
        return npos;
    }

    /// Index of the lowest set bit strictly after i, or npos.
    std::size_t next(std::size_t i) const noexcept
    {
        ++i;
        if (i >= size_) {
            return npos;
        }
        std::size_t k = i >> 6;
        std::uint64_t w = words_[k] & (~std::uint64_t{0} << (i & 63));
        while (true) {
            if (w != 0) {
                return k * 64 + static_cast<std::size_t>(std::countr_zero(w));
            }
            if (++k == words_.size()) {
                return npos;
            }
            w = words_[k];
        }
    }

    Bitset& operator&=(const Bitset& o) noexcept
    {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            words_[k] &= o.words_[k];
        }
        return *this;
    }

    Bitset& operator|=(const Bitset& o) noexcept
    {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            words_[k] |= o.words_[k];
        }
        return *this;
    }

    /// this &= ~o
    Bitset& subtract(const Bitset& o) noexcept
    {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            words_[k] &= ~o.words_[k];
        }
        return *this;
    }

    bool intersects(const Bitset& o) const noexcept
    {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            if ((words_[k] & o.words_[k]) != 0) {
                return true;
            }
        }
        return false;
    }

    friend bool operator==(const Bitset&, const Bitset&) = default;

private:
    void trim() noexcept
    {
        if (size_ % 64 != 0 && !words_.empty()) {
            words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
        }
    }

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

} // namespace coopbandit

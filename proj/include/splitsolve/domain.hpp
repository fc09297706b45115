#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace splitsolve {

/// Largest value representable in a Domain, plus one.
inline constexpr int kDomainCapacity = 64;

/// A finite set of small non-negative integers, stored as a 64-bit mask.
///
/// Every workload we run has values in 0..n-1 with n <= 10, so a single word
/// is enough and all set operations are branch-free.
class Domain {
public:
    constexpr Domain() = default;
    constexpr explicit Domain(std::uint64_t bits) : bits_(bits) {}
    static Domain of(std::initializer_list<int> values)
    {
        Domain d;
        for (int v : values)
            d.insert(v);
        return d;
    }

    /// The contiguous range lo..hi inclusive; empty when lo > hi.
    static constexpr Domain range(int lo, int hi)
    {
        if (lo < 0)
            lo = 0;
        if (hi >= kDomainCapacity)
            hi = kDomainCapacity - 1;
        if (lo > hi)
            return Domain{};
        std::uint64_t upper = hi == 63 ? ~std::uint64_t{0} : ((std::uint64_t{1} << (hi + 1)) - 1);
        std::uint64_t lower = (std::uint64_t{1} << lo) - 1;
        return Domain{upper & ~lower};
    }

    static constexpr Domain single(int v) { return Domain{std::uint64_t{1} << v}; }

    static Domain from_values(const std::vector<int> & values)
    {
        Domain d;
        for (int v : values)
            d.insert(v);
        return d;
    }

    constexpr std::uint64_t bits() const { return bits_; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr int size() const { return std::popcount(bits_); }
    constexpr bool is_single() const { return bits_ != 0 && (bits_ & (bits_ - 1)) == 0; }
    constexpr int min() const { return std::countr_zero(bits_); }
    constexpr int max() const { return 63 - std::countl_zero(bits_); }

    constexpr bool contains(int v) const
    {
        return v >= 0 && v < kDomainCapacity && ((bits_ >> v) & 1U);
    }

    constexpr void insert(int v) { bits_ |= std::uint64_t{1} << v; }
    constexpr void erase(int v)
    {
        if (v >= 0 && v < kDomainCapacity)
            bits_ &= ~(std::uint64_t{1} << v);
    }

    constexpr Domain operator&(Domain o) const { return Domain{bits_ & o.bits_}; }
    constexpr Domain operator|(Domain o) const { return Domain{bits_ | o.bits_}; }
    constexpr Domain without(Domain o) const { return Domain{bits_ & ~o.bits_}; }
    constexpr bool subset_of(Domain o) const { return (bits_ & ~o.bits_) == 0; }
    constexpr bool operator==(const Domain &) const = default;

    /// Values <= v.
    static constexpr Domain at_most(int v) { return range(0, v); }
    /// Values >= v.
    static constexpr Domain at_least(int v) { return range(v, kDomainCapacity - 1); }

    std::vector<int> values() const
    {
        std::vector<int> out;
        out.reserve(size());
        for (std::uint64_t b = bits_; b != 0; b &= b - 1)
            out.push_back(std::countr_zero(b));
        return out;
    }

    template <typename F>
    constexpr void for_each(F && f) const
    {
        for (std::uint64_t b = bits_; b != 0; b &= b - 1)
            f(std::countr_zero(b));
    }

    std::string to_string() const
    {
        std::string s = "{";
        bool first = true;
        for_each([&](int v) {
            if (! first)
                s += ",";
            s += std::to_string(v);
            first = false;
        });
        return s + "}";
    }

private:
    std::uint64_t bits_ = 0;
};

} // namespace splitsolve

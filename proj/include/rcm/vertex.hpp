#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace rcm {

inline constexpr std::size_t kMaxDim = 8;

// Integer coordinates. Lattice vertices use them directly; gasket vertices are
// stored as 2^L-scaled points of the pre-gasket, which are also integral.
struct Vertex {
    std::array<std::int64_t, kMaxDim> c{};
    std::uint8_t dim = 0;

    Vertex() = default;
    explicit Vertex(int d) : dim(static_cast<std::uint8_t>(d)) {
        if (d < 0 || static_cast<std::size_t>(d) > kMaxDim) throw std::invalid_argument("vertex dimension out of range");
    }
    Vertex(std::initializer_list<std::int64_t> coords) : dim(static_cast<std::uint8_t>(coords.size())) {
        if (coords.size() > kMaxDim) throw std::invalid_argument("vertex dimension out of range");
        std::size_t i = 0;
        for (auto v : coords) c[i++] = v;
    }

    std::int64_t& operator[](std::size_t i) { return c[i]; }
    std::int64_t operator[](std::size_t i) const { return c[i]; }
    int size() const { return dim; }

    // Unused slots are always zero, so the default comparison is lexicographic on coords.
    friend auto operator<=>(const Vertex&, const Vertex&) = default;
    friend bool operator==(const Vertex&, const Vertex&) = default;

    Vertex operator+(const Vertex& o) const {
        Vertex r = *this;
        for (int i = 0; i < dim; ++i) r.c[i] += o.c[i];
        return r;
    }
    Vertex operator-(const Vertex& o) const {
        Vertex r = *this;
        for (int i = 0; i < dim; ++i) r.c[i] -= o.c[i];
        return r;
    }

    std::string str() const {
        std::string s;
        for (int i = 0; i < dim; ++i) {
            if (i) s += ';';
            s += std::to_string(c[i]);
        }
        return s;
    }
};

inline double squared_norm(const Vertex& v) {
    double s = 0.0;
    for (int i = 0; i < v.dim; ++i) s += static_cast<double>(v.c[i]) * static_cast<double>(v.c[i]);
    return s;
}

struct VertexHash {
    std::size_t operator()(const Vertex& v) const noexcept {
        std::uint64_t h = 0x243f6a8885a308d3ULL ^ v.dim;
        for (int i = 0; i < v.dim; ++i) {
            h ^= static_cast<std::uint64_t>(v.c[i]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace rcm

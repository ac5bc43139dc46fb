#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rcm/vertex.hpp"

namespace rcm {

enum class LatticeKind { FullLattice, HalfSpace, Gasket };
enum class Metric { Euclidean, GraphDistance };

struct LatticeSpec {
    LatticeKind kind = LatticeKind::FullLattice;
    // HalfSpace: the first d1 coordinates are constrained to be >= 0.
    // FullLattice(d) is stored as d1 = 0, d2 = d.
    int d1 = 0;
    int d2 = 1;
    // Gasket: ambient dimension N and number of generated levels.
    int n_ambient = 2;
    int levels = 6;
    Metric metric = Metric::Euclidean;
    // c_M = 1 is counting measure; otherwise mu_x is a seeded value in [1/c_M, c_M].
    double measure_cm = 1.0;
    std::uint64_t measure_seed = 0;

    static LatticeSpec full(int d);
    static LatticeSpec half(int d1, int d2);
    static LatticeSpec gasket(int n_ambient, int levels);

    int ambient_dim() const;
    double volume_dimension() const;
    bool counting_measure() const { return measure_cm == 1.0; }
};

struct DSetDiagnostic {
    double c_lower = 0.0;
    double c_upper = 0.0;
};

class Lattice {
public:
    explicit Lattice(LatticeSpec spec);

    const LatticeSpec& spec() const { return spec_; }
    LatticeKind kind() const { return spec_.kind; }
    int dim() const { return spec_.ambient_dim(); }
    double d() const { return spec_.volume_dimension(); }
    Vertex origin() const { return Vertex(dim()); }

    bool contains(const Vertex& v) const;
    void require(const Vertex& v) const;

    double distance(const Vertex& x, const Vertex& y) const;
    // Vertices at distance <= r, ascending lexicographic order.
    std::vector<Vertex> ball(const Vertex& center, double r) const;

    double mu(const Vertex& x) const;
    double mu_max() const { return spec_.measure_cm; }
    double mu_ball(const Vertex& center, double r) const;

    DSetDiagnostic dset_diagnostic(std::span<const Vertex> centers, std::span<const double> radii) const;

    // True when every distance is an integer (Z^1 and the gasket graph metric).
    bool integer_distances() const;

    // Gasket support. The generated region is the level-L piece 2^L K with
    // corner 0; it meets the rest of the unbounded gasket only at the corners
    // 2^L e_i, i >= 1.
    const std::vector<Vertex>& gasket_vertices() const;
    int gasket_index(const Vertex& v) const;
    // Graph distances from v to every generated vertex (index order of gasket_vertices()).
    std::shared_ptr<const std::vector<std::int32_t>> gasket_distance_row(const Vertex& v) const;
    // Distance from v to the nearest outer corner; vertices outside the
    // generated region are at distance >= this + 1.
    std::int64_t gasket_exit_distance(const Vertex& v) const;

private:
    struct GasketGraph;
    LatticeSpec spec_;
    std::shared_ptr<GasketGraph> gasket_;
};

}  // namespace rcm

#include "rcm/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "rcm/rng.hpp"

namespace rcm {

LatticeSpec LatticeSpec::full(int d) {
    LatticeSpec s;
    s.kind = LatticeKind::FullLattice;
    s.d1 = 0;
    s.d2 = d;
    return s;
}

LatticeSpec LatticeSpec::half(int d1, int d2) {
    LatticeSpec s;
    s.kind = LatticeKind::HalfSpace;
    s.d1 = d1;
    s.d2 = d2;
    return s;
}

LatticeSpec LatticeSpec::gasket(int n_ambient, int levels) {
    LatticeSpec s;
    s.kind = LatticeKind::Gasket;
    s.n_ambient = n_ambient;
    s.levels = levels;
    s.metric = Metric::GraphDistance;
    return s;
}

int LatticeSpec::ambient_dim() const { return kind == LatticeKind::Gasket ? n_ambient : d1 + d2; }

double LatticeSpec::volume_dimension() const {
    if (kind == LatticeKind::Gasket) return std::log(static_cast<double>(n_ambient + 1)) / std::log(2.0);
    return static_cast<double>(d1 + d2);
}

struct Lattice::GasketGraph {
    std::vector<Vertex> verts;  // sorted
    std::unordered_map<Vertex, int, VertexHash> index;
    std::vector<std::vector<int>> adj;
    std::vector<int> corners;  // indices of 2^L e_i, i >= 1

    mutable std::mutex mu;
    mutable std::unordered_map<int, std::shared_ptr<const std::vector<std::int32_t>>> rows;

    std::shared_ptr<const std::vector<std::int32_t>> row(int src) const {
        {
            std::lock_guard lk(mu);
            auto it = rows.find(src);
            if (it != rows.end()) return it->second;
        }
        auto dist = std::make_shared<std::vector<std::int32_t>>(verts.size(), -1);
        std::deque<int> queue{src};
        (*dist)[src] = 0;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int v : adj[u]) {
                if ((*dist)[v] < 0) {
                    (*dist)[v] = (*dist)[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        std::lock_guard lk(mu);
        if (rows.size() >= 4096) rows.clear();
        rows.emplace(src, dist);
        return dist;
    }
};

namespace {

void validate_spec(const LatticeSpec& s) {
    switch (s.kind) {
        case LatticeKind::FullLattice:
            if (s.d1 != 0 || s.d2 < 1) throw std::invalid_argument("lattice: FullLattice needs d >= 1");
            break;
        case LatticeKind::HalfSpace:
            if (s.d1 < 0 || s.d2 < 0 || s.d1 + s.d2 < 1) throw std::invalid_argument("lattice: HalfSpace needs d1, d2 >= 0 and d1 + d2 >= 1");
            break;
        case LatticeKind::Gasket:
            if (s.n_ambient < 2) throw std::invalid_argument("lattice: gasket ambient dimension must be >= 2");
            if (s.levels < 0 || s.levels > 12) throw std::invalid_argument("lattice: gasket levels must be in [0,12]");
            break;
    }
    if (s.ambient_dim() > static_cast<int>(kMaxDim)) throw std::invalid_argument("lattice: dimension exceeds supported maximum");
    if (s.kind == LatticeKind::Gasket && s.metric != Metric::GraphDistance)
        throw std::invalid_argument("lattice: gasket requires the graph metric");
    if (s.kind != LatticeKind::Gasket && s.metric != Metric::Euclidean)
        throw std::invalid_argument("lattice: lattice kinds use the Euclidean metric");
    if (!(s.measure_cm >= 1.0)) throw std::invalid_argument("lattice: measure bound c_M must be >= 1");
}

}  // namespace

Lattice::Lattice(LatticeSpec spec) : spec_(spec) {
    validate_spec(spec_);
    if (spec_.kind != LatticeKind::Gasket) return;

    const int n = spec_.n_ambient;
    const int levels = spec_.levels;
    // Unit cells of 2^L K: offsets sum_k 2^k e_{i_k} with e_0 = 0.
    std::vector<Vertex> offsets{Vertex(n)};
    for (int k = 0; k < levels; ++k) {
        std::vector<Vertex> next;
        next.reserve(offsets.size() * static_cast<std::size_t>(n + 1));
        const std::int64_t step = std::int64_t{1} << k;
        for (int i = 0; i <= n; ++i) {
            for (const auto& o : offsets) {
                Vertex v = o;
                if (i > 0) v[i - 1] += step;
                next.push_back(v);
            }
        }
        offsets = std::move(next);
    }
    auto g = std::make_shared<GasketGraph>();
    std::vector<std::array<Vertex, kMaxDim + 1>> cells;
    cells.reserve(offsets.size());
    for (const auto& o : offsets) {
        std::array<Vertex, kMaxDim + 1> cell{};
        cell[0] = o;
        for (int i = 1; i <= n; ++i) {
            cell[i] = o;
            cell[i][i - 1] += 1;
        }
        for (int i = 0; i <= n; ++i) g->verts.push_back(cell[i]);
        cells.push_back(cell);
    }
    std::sort(g->verts.begin(), g->verts.end());
    g->verts.erase(std::unique(g->verts.begin(), g->verts.end()), g->verts.end());
    for (std::size_t i = 0; i < g->verts.size(); ++i) g->index.emplace(g->verts[i], static_cast<int>(i));
    g->adj.assign(g->verts.size(), {});
    for (const auto& cell : cells) {
        for (int i = 0; i <= n; ++i) {
            for (int j = i + 1; j <= n; ++j) {
                const int a = g->index.at(cell[i]);
                const int b = g->index.at(cell[j]);
                g->adj[a].push_back(b);
                g->adj[b].push_back(a);
            }
        }
    }
    for (auto& nb : g->adj) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    const std::int64_t side = std::int64_t{1} << levels;
    for (int i = 1; i <= n; ++i) {
        Vertex c(n);
        c[i - 1] = side;
        g->corners.push_back(g->index.at(c));
    }
    gasket_ = std::move(g);
}

bool Lattice::contains(const Vertex& v) const {
    if (v.dim != dim()) return false;
    switch (spec_.kind) {
        case LatticeKind::FullLattice:
            return true;
        case LatticeKind::HalfSpace:
            for (int i = 0; i < spec_.d1; ++i)
                if (v[i] < 0) return false;
            return true;
        case LatticeKind::Gasket:
            return gasket_->index.count(v) > 0;
    }
    return false;
}

void Lattice::require(const Vertex& v) const {
    if (!contains(v)) throw std::invalid_argument("invalid vertex for lattice: (" + v.str() + ")");
}

double Lattice::distance(const Vertex& x, const Vertex& y) const {
    require(x);
    require(y);
    if (spec_.kind != LatticeKind::Gasket) return std::sqrt(squared_norm(x - y));
    if (x == y) return 0.0;
    const auto row = gasket_distance_row(x);
    return static_cast<double>((*row)[gasket_->index.at(y)]);
}

std::vector<Vertex> Lattice::ball(const Vertex& center, double r) const {
    if (!(r >= 0.0)) throw std::invalid_argument("ball: radius must be nonnegative");
    require(center);
    std::vector<Vertex> out;
    if (spec_.kind == LatticeKind::Gasket) {
        if (r >= static_cast<double>(gasket_exit_distance(center)) + 1.0)
            throw std::out_of_range("ball: radius exceeds the generated gasket extent");
        const auto row = gasket_distance_row(center);
        for (std::size_t i = 0; i < row->size(); ++i)
            if (static_cast<double>((*row)[i]) <= r) out.push_back(gasket_->verts[i]);
        return out;  // verts are already sorted
    }
    const int d = dim();
    const auto k = static_cast<std::int64_t>(std::floor(r));
    const double r2 = r * r;
    Vertex off(d);
    for (int i = 0; i < d; ++i) off[i] = -k;
    // Odometer over the bounding box; the last coordinate varies fastest, so
    // the output is in lexicographic order.
    for (;;) {
        if (squared_norm(off) <= r2 + 1e-9) {
            Vertex v = center + off;
            if (contains(v)) out.push_back(v);
        }
        int i = d - 1;
        while (i >= 0 && off[i] == k) {
            off[i] = -k;
            --i;
        }
        if (i < 0) break;
        ++off[i];
    }
    return out;
}

double Lattice::mu(const Vertex& x) const {
    if (spec_.counting_measure()) return 1.0;
    const double u = to_unit_open(mix_seed(spec_.measure_seed, VertexHash{}(x)));
    return std::pow(spec_.measure_cm, 2.0 * u - 1.0);
}

double Lattice::mu_ball(const Vertex& center, double r) const {
    const auto b = ball(center, r);
    if (spec_.counting_measure()) return static_cast<double>(b.size());
    double s = 0.0;
    for (const auto& v : b) s += mu(v);
    return s;
}

DSetDiagnostic Lattice::dset_diagnostic(std::span<const Vertex> centers, std::span<const double> radii) const {
    if (centers.empty() || radii.empty()) throw std::invalid_argument("dset_diagnostic: empty sample set");
    DSetDiagnostic out{std::numeric_limits<double>::infinity(), 0.0};
    const double dv = d();
    for (const auto& c : centers) {
        for (double r : radii) {
            if (r < 1.0) throw std::invalid_argument("dset_diagnostic: radii must be >= 1");
            const double ratio = mu_ball(c, r) / std::pow(r, dv);
            out.c_lower = std::min(out.c_lower, ratio);
            out.c_upper = std::max(out.c_upper, ratio);
        }
    }
    return out;
}

bool Lattice::integer_distances() const { return spec_.kind == LatticeKind::Gasket || dim() == 1; }

const std::vector<Vertex>& Lattice::gasket_vertices() const {
    if (!gasket_) throw std::logic_error("gasket_vertices: not a gasket lattice");
    return gasket_->verts;
}

int Lattice::gasket_index(const Vertex& v) const {
    if (!gasket_) throw std::logic_error("gasket_index: not a gasket lattice");
    auto it = gasket_->index.find(v);
    if (it == gasket_->index.end()) throw std::invalid_argument("invalid vertex for lattice: (" + v.str() + ")");
    return it->second;
}

std::shared_ptr<const std::vector<std::int32_t>> Lattice::gasket_distance_row(const Vertex& v) const {
    return gasket_->row(gasket_index(v));
}

std::int64_t Lattice::gasket_exit_distance(const Vertex& v) const {
    const auto row = gasket_distance_row(v);
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (int c : gasket_->corners) best = std::min<std::int64_t>(best, (*row)[c]);
    return best;
}

}  // namespace rcm

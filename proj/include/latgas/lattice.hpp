// Finite lattice geometry: periodic tori, cubes with their boundary/interior
// and bond sets, and triadic tilings. Everything here is immutable after
// construction.
#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "latgas/core.hpp"

namespace latgas {

// Periodic box {0,...,side-1}^dim with site indices in row-major order.
class Torus {
  public:
    Torus(int dim, int side) : dim_(dim), side_(side) {
        if (dim < 1 || dim > kMaxDim) throw ConfigError("torus: dimension out of range");
        if (side < 2) throw ConfigError("torus: side must be at least 2");
        n_sites_ = 1;
        for (int i = 0; i < dim; ++i) {
            if (n_sites_ > (int64_t(1) << 42) / side) throw SizeError("torus: too many sites");
            n_sites_ *= side;
        }
    }

    int dim() const { return dim_; }
    int side() const { return side_; }
    int64_t num_sites() const { return n_sites_; }

    int wrap(int c) const {
        int r = c % side_;
        return r < 0 ? r + side_ : r;
    }

    Coord wrap(const Coord& c) const {
        Coord w{};
        for (int i = 0; i < dim_; ++i) w[i] = wrap(c[i]);
        return w;
    }

    int64_t index(const Coord& c) const {
        int64_t id = 0;
        for (int i = 0; i < dim_; ++i) id = id * side_ + wrap(c[i]);
        return id;
    }

    Coord site(int64_t id) const {
        Coord c{};
        for (int i = dim_ - 1; i >= 0; --i) {
            c[i] = int(id % side_);
            id /= side_;
        }
        return c;
    }

    int64_t neighbor(int64_t id, int axis, int dir) const {
        Coord c = site(id);
        c[axis] += dir;
        return index(c);
    }

    // Directed unit-step bonds {x, x+e_i} for every site x and axis i. For
    // side >= 3 this enumerates each unordered nearest-neighbor pair exactly
    // once; for side == 2 the wrap makes each pair appear twice, which is the
    // correct bond multiplicity of the wrapped generator.
    std::vector<std::pair<int64_t, int64_t>> bond_list() const {
        std::vector<std::pair<int64_t, int64_t>> bonds;
        bonds.reserve(size_t(n_sites_) * dim_);
        for (int64_t s = 0; s < n_sites_; ++s)
            for (int i = 0; i < dim_; ++i) bonds.emplace_back(s, neighbor(s, i, +1));
        return bonds;
    }

  private:
    int dim_;
    int side_;
    int64_t n_sites_;
};

// A cube of Z^d given by a center and an odd side length. Triadic cubes are
// the special case side = 3^m.
class Cube {
  public:
    Cube(int dim, Coord center, int side) : dim_(dim), center_(center), side_(side) {
        if (dim < 1 || dim > kMaxDim) throw ConfigError("cube: dimension out of range");
        if (side < 1 || side % 2 == 0) throw ConfigError("cube: side must be odd and positive");
        const int radius = (side - 1) / 2;
        Coord c = center;
        std::vector<Coord> sites;
        Coord lo{}, hi{};
        for (int i = 0; i < dim; ++i) {
            lo[i] = c[i] - radius;
            hi[i] = c[i] + radius;
        }
        Coord cur = lo;
        for (;;) {
            sites.push_back(cur);
            int axis = dim - 1;
            while (axis >= 0) {
                if (++cur[axis] <= hi[axis]) break;
                cur[axis] = lo[axis];
                --axis;
            }
            if (axis < 0) break;
        }
        std::sort(sites.begin(), sites.end());
        sites_ = std::move(sites);
        lo_ = lo;
        hi_ = hi;
    }

    static Cube triadic(int dim, Coord center, int m) {
        int side = 1;
        for (int i = 0; i < m; ++i) side *= 3;
        return Cube(dim, center, side);
    }

    int dim() const { return dim_; }
    int side() const { return side_; }
    int radius() const { return (side_ - 1) / 2; }
    const Coord& center() const { return center_; }
    const std::vector<Coord>& sites() const { return sites_; }
    int64_t volume() const { return int64_t(sites_.size()); }

    bool contains(const Coord& x) const {
        for (int i = 0; i < dim_; ++i)
            if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
        return true;
    }

    // Sites of the cube with a nearest neighbor outside it.
    std::vector<Coord> boundary() const {
        std::vector<Coord> out;
        for (const Coord& x : sites_) {
            bool on_boundary = false;
            for (int i = 0; i < dim_ && !on_boundary; ++i) {
                Coord p = x, m = x;
                p[i] += 1;
                m[i] -= 1;
                on_boundary = !contains(p) || !contains(m);
            }
            if (on_boundary) out.push_back(x);
        }
        return out;
    }

    std::vector<Coord> interior() const {
        std::vector<Coord> bd = boundary();
        std::set<Coord> bset(bd.begin(), bd.end());
        std::vector<Coord> out;
        for (const Coord& x : sites_)
            if (!bset.count(x)) out.push_back(x);
        return out;
    }

    // Lambda^+ = Lambda united with its +e_i translates.
    std::vector<Coord> enlarged_sites() const {
        std::set<Coord> s(sites_.begin(), sites_.end());
        for (const Coord& x : sites_)
            for (int i = 0; i < dim_; ++i) s.insert(add(x, unit(i)));
        return std::vector<Coord>(s.begin(), s.end());
    }

  private:
    int dim_;
    Coord center_;
    int side_;
    Coord lo_{}, hi_{};
    std::vector<Coord> sites_;
};

// Nearest-neighbor pairs with both endpoints inside the site set.
inline std::vector<Bond> bonds(const std::vector<Coord>& sites, int dim) {
    std::set<Coord> members(sites.begin(), sites.end());
    std::vector<Bond> out;
    for (const Coord& x : sites)
        for (int i = 0; i < dim; ++i) {
            Coord y = add(x, unit(i));
            if (members.count(y)) out.push_back(make_bond(x, y));
        }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<Bond> bonds(const Cube& cube) { return bonds(cube.sites(), cube.dim()); }

// Pairs {x, x+e_i} for every x in the cube; exactly d * |cube| of them.
inline std::vector<Bond> enlarged_bonds(const Cube& cube) {
    std::vector<Bond> out;
    out.reserve(cube.sites().size() * cube.dim());
    for (const Coord& x : cube.sites())
        for (int i = 0; i < cube.dim(); ++i) out.push_back(make_bond(x, add(x, unit(i))));
    std::sort(out.begin(), out.end());
    return out;
}

// Centers 3^m Z^d of the triadic tiling of a torus. Requires 3^m | side.
inline std::vector<Coord> triadic_centers(int m, const Torus& box) {
    int scale = 1;
    for (int i = 0; i < m; ++i) scale *= 3;
    if (box.side() % scale != 0)
        throw ConfigError("triadic_centers: torus side not divisible by 3^m");
    const int per_axis = box.side() / scale;
    std::vector<Coord> centers;
    Coord cur{};
    std::vector<int> idx(box.dim(), 0);
    for (;;) {
        for (int i = 0; i < box.dim(); ++i) cur[i] = idx[i] * scale;
        centers.push_back(cur);
        int axis = box.dim() - 1;
        while (axis >= 0) {
            if (++idx[axis] < per_axis) break;
            idx[axis] = 0;
            --axis;
        }
        if (axis < 0) break;
    }
    return centers;
}

}  // namespace latgas

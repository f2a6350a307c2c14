// Scalar discrete heat flow for a symmetric jump kernel Q — spectral evolution
// on the torus, the covariance matrix, and the Gaussian l2 comparison — plus
// the n-point exclusion Laplacian acting on kernels over K_n.
#pragma once

#include <cmath>
#include <complex>
#include <map>

#include "latgas/core.hpp"
#include "latgas/expm.hpp"
#include "latgas/lattice.hpp"
#include "latgas/smallmat.hpp"

namespace latgas {

// Finitely supported symmetric rates Q : Z^d -> [0, inf), Q_0 = 0. Rates, not
// probabilities: the generator (1/2) Delta_Q is insensitive to the total mass,
// and the covariance-realizing construction generally has total mass above 1.
class JumpKernel {
  public:
    JumpKernel(int dim, std::map<Coord, double> rates) : dim_(dim) {
        for (auto& [y, q] : rates) {
            if (q < 0.0) throw ConfigError("jump kernel: negative rate");
            if (q == 0.0) continue;
            if (y == coord_zero()) throw ConfigError("jump kernel: Q_0 must vanish");
            entries_[y] = q;
        }
        for (auto& [y, q] : entries_) {
            auto it = entries_.find(negate(y));
            if (it == entries_.end() || std::abs(it->second - q) > 1e-12 * (1.0 + q))
                throw ConfigError("jump kernel: symmetry Q_y = Q_{-y} violated");
        }
        radius_ = 0;
        total_ = 0.0;
        for (auto& [y, q] : entries_) {
            radius_ = std::max(radius_, linf_norm(y));
            total_ += q;
        }
    }

    static JumpKernel nearest_neighbor(int dim, double rate) {
        std::map<Coord, double> r;
        for (int i = 0; i < dim; ++i) {
            r[unit(i)] = rate;
            r[negate(unit(i))] = rate;
        }
        return JumpKernel(dim, std::move(r));
    }

    int dim() const { return dim_; }
    int radius() const { return radius_; }
    double total_rate() const { return total_; }
    const std::map<Coord, double>& entries() const { return entries_; }

    double at(const Coord& y) const {
        auto it = entries_.find(y);
        return it == entries_.end() ? 0.0 : it->second;
    }

  private:
    int dim_;
    std::map<Coord, double> entries_;
    int radius_ = 0;
    double total_ = 0.0;
};

// M_ij = sum_y Q_y y_i y_j
inline SymMat covariance(const JumpKernel& q) {
    SymMat m = SymMat::zero(q.dim());
    for (const auto& [y, rate] : q.entries())
        for (int i = 0; i < q.dim(); ++i)
            for (int j = 0; j < q.dim(); ++j) m(i, j) += rate * y[i] * y[j];
    return m;
}

namespace detail {

// In-place DFT along each axis (naive O(N^2) per line; the tori here are small
// enough that this beats pulling in an FFT dependency).
inline void dft_axis(std::vector<std::complex<double>>& data, const Torus& torus, int axis,
                     bool inverse) {
    const int n = torus.side();
    const int d = torus.dim();
    int64_t stride = 1;
    for (int i = axis + 1; i < d; ++i) stride *= n;
    int64_t lines = torus.num_sites() / n;
    std::vector<std::complex<double>> twiddle(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k)
        twiddle[k] = std::polar(1.0, sign * 2.0 * M_PI * k / n);
    std::vector<std::complex<double>> line(n), out(n);
    for (int64_t l = 0; l < lines; ++l) {
        // first site of line l along `axis`
        int64_t block = l / stride, off = l % stride;
        int64_t base = block * stride * n + off;
        for (int j = 0; j < n; ++j) line[j] = data[base + j * stride];
        for (int k = 0; k < n; ++k) {
            std::complex<double> acc = 0.0;
            int idx = 0;
            for (int j = 0; j < n; ++j) {
                acc += line[j] * twiddle[idx];
                idx += k;
                if (idx >= n) idx -= n;
            }
            out[k] = acc;
        }
        for (int j = 0; j < n; ++j) data[base + j * stride] = out[j];
    }
}

}  // namespace detail

// f_t = e^{t Delta_Q / 2} f in the plane-wave eigenbasis of the torus.
inline std::vector<double> heat_evolve(const JumpKernel& q, const Torus& torus,
                                       const std::vector<double>& f, double t) {
    if (q.dim() != torus.dim()) throw ConfigError("heat_evolve: dimension mismatch");
    if (torus.side() <= 2 * q.radius())
        throw ConfigError("heat_evolve: torus side must exceed twice the kernel radius");
    if (int64_t(f.size()) != torus.num_sites()) throw ConfigError("heat_evolve: size mismatch");
    if (t < 0.0) throw DomainError("heat_evolve: negative time");

    const int d = torus.dim();
    const int n = torus.side();
    std::vector<std::complex<double>> data(f.begin(), f.end());
    for (int axis = 0; axis < d; ++axis) detail::dft_axis(data, torus, axis, false);

    // symbol of (1/2)Delta_Q: mu(k) = sum_y Q_y (cos(2 pi k.y / n) - 1)
    for (int64_t id = 0; id < torus.num_sites(); ++id) {
        Coord k = torus.site(id);
        double mu = 0.0;
        for (const auto& [y, rate] : q.entries()) {
            double phase = 0.0;
            for (int i = 0; i < d; ++i) phase += double(k[i]) * double(y[i]);
            mu += rate * (std::cos(2.0 * M_PI * phase / n) - 1.0);
        }
        data[id] *= std::exp(t * mu);
    }

    for (int axis = 0; axis < d; ++axis) detail::dft_axis(data, torus, axis, true);
    const double norm = 1.0 / double(torus.num_sites());
    std::vector<double> out(f.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = data[i].real() * norm;
    return out;
}

struct NashComparison {
    double t = 0.0;
    double l2_norm = 0.0;
    double gaussian_prediction = 0.0;
    double gap = 0.0;
    double rescaled_gap = 0.0;  // gap * t^{(d+2)/4}
};

// l2 norm of the evolved function against |m_f| / ((4 pi t)^d det M)^{1/4}.
inline NashComparison nash_compare(const JumpKernel& q, const Torus& torus,
                                   const std::vector<double>& f, double t) {
    if (t <= 0.0) throw DomainError("nash_compare: need t > 0");
    const SymMat m = covariance(q);
    const double m_max = max_eigenvalue(m);
    if (double(torus.side()) < 8.0 * std::sqrt(m_max * t))
        throw DomainError("nash_compare: torus too small for the Gaussian tail rule");
    const std::vector<double> ft = heat_evolve(q, torus, f, t);
    double l2sq = 0.0, mass = 0.0;
    for (size_t i = 0; i < f.size(); ++i) {
        l2sq += ft[i] * ft[i];
        mass += f[i];
    }
    const int d = torus.dim();
    NashComparison r;
    r.t = t;
    r.l2_norm = std::sqrt(l2sq);
    r.gaussian_prediction =
        std::abs(mass) / std::pow(std::pow(4.0 * M_PI * t, d) * determinant(m), 0.25);
    r.gap = std::abs(r.l2_norm - r.gaussian_prediction);
    r.rescaled_gap = r.gap * std::pow(t, 0.25 * (d + 2));
    return r;
}

// --- n-point exclusion Laplacian ----------------------------------------------

// Kernels over K_n(torus): tables indexed by the combinadic rank of the sorted
// site-index n-tuple.
class SubsetSpace {
  public:
    SubsetSpace(const Torus& torus, int n) : torus_(torus), n_(n) {
        if (n < 1 || n > 4) throw ConfigError("subset space: level must be 1..4");
        const int64_t s = torus.num_sites();
        if (s < n) throw ConfigError("subset space: fewer sites than points");
        size_ = binomial_i(s, n);
        if (size_ > (int64_t(1) << 28)) throw SizeError("subset space: too large");
    }

    const Torus& torus() const { return torus_; }
    int level() const { return n_; }
    int64_t size() const { return size_; }

    int64_t rank(const std::vector<int64_t>& sorted_sites) const {
        int64_t r = 0;
        for (int i = 0; i < n_; ++i) r += binomial_i(sorted_sites[i], i + 1);
        return r;
    }

    std::vector<int64_t> unrank(int64_t r) const {
        std::vector<int64_t> y(n_);
        int64_t s = torus_.num_sites();
        for (int i = n_ - 1; i >= 0; --i) {
            // largest v with C(v, i+1) <= r
            int64_t lo = i, hi = s - 1, v = i;
            while (lo <= hi) {
                int64_t mid = (lo + hi) / 2;
                if (binomial_i(mid, i + 1) <= r) {
                    v = mid;
                    lo = mid + 1;
                } else {
                    hi = mid - 1;
                }
            }
            y[i] = v;
            r -= binomial_i(v, i + 1);
            s = v;
        }
        return y;
    }

    // Visit every n-subset in rank order.
    template <typename F>
    void for_each(F&& fn) const {
        std::vector<int64_t> y(n_);
        for (int i = 0; i < n_; ++i) y[i] = i;
        const int64_t s = torus_.num_sites();
        int64_t r = 0;
        for (;;) {
            fn(r, y);
            ++r;
            int i = 0;
            while (i < n_) {
                ++y[i];
                const int64_t limit = (i + 1 < n_) ? y[i + 1] : s;
                if (y[i] < limit) break;
                ++i;
            }
            if (i == n_) break;
            for (int j = 0; j < i; ++j) y[j] = j;
        }
    }

  private:
    Torus torus_;
    int n_;
    int64_t size_;
};

// [ (1/2) Delta_Q^{(n)} f ](Y) = sum_{x in Y, y not in Y} Q_{y-x} (f(Y u y \ x) - f(Y)).
// Moves onto occupied points are excluded; for n = 1 this is the scalar
// (1/2) Delta_Q.
inline std::vector<double> exclusion_laplacian_apply(const JumpKernel& q, const SubsetSpace& ks,
                                                     const std::vector<double>& f) {
    const Torus& torus = ks.torus();
    if (torus.side() <= 2 * q.radius())
        throw ConfigError("exclusion laplacian: torus side must exceed twice the kernel radius");
    if (int64_t(f.size()) != ks.size()) throw ConfigError("exclusion laplacian: size mismatch");
    std::vector<double> out(f.size(), 0.0);
    const int n = ks.level();
    std::vector<int64_t> z(n);
    ks.for_each([&](int64_t r, const std::vector<int64_t>& y) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const Coord xc = torus.site(y[i]);
            for (const auto& [off, rate] : q.entries()) {
                const int64_t target = torus.index(add(xc, off));
                bool occupied = false;
                for (int j = 0; j < n; ++j)
                    if (y[j] == target) {
                        occupied = true;
                        break;
                    }
                if (occupied) continue;
                z = y;
                z[i] = target;
                std::sort(z.begin(), z.end());
                acc += rate * (f[ks.rank(z)] - f[r]);
            }
        }
        out[r] = acc;
    });
    return out;
}

// e^{t Delta_Q^{(n)} / 2} f by uniformization; the l1 norm never grows.
inline std::vector<double> evolve_exclusion(const JumpKernel& q, const SubsetSpace& ks,
                                            std::vector<double> f, double t,
                                            double tol = 1e-12) {
    const double lam = double(ks.level()) * q.total_rate();
    auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
        out = exclusion_laplacian_apply(q, ks, in);
    };
    return uniformized_expm(apply, lam, t, std::move(f), tol);
}

inline double l1_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

inline double l2_norm_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace latgas

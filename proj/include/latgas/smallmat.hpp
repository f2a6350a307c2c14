// Dense symmetric d x d matrices (d <= kMaxDim) with a Jacobi eigensolver.
#pragma once

#include <cmath>
#include <cstring>

#include "latgas/core.hpp"

namespace latgas {

struct SymMat {
    int d = 0;
    double m[kMaxDim][kMaxDim] = {};

    static SymMat identity(int d) {
        SymMat a;
        a.d = d;
        for (int i = 0; i < d; ++i) a.m[i][i] = 1.0;
        return a;
    }

    static SymMat zero(int d) {
        SymMat a;
        a.d = d;
        return a;
    }

    double& operator()(int i, int j) { return m[i][j]; }
    double operator()(int i, int j) const { return m[i][j]; }
};

inline SymMat operator+(const SymMat& a, const SymMat& b) {
    SymMat c = SymMat::zero(a.d);
    for (int i = 0; i < a.d; ++i)
        for (int j = 0; j < a.d; ++j) c.m[i][j] = a.m[i][j] + b.m[i][j];
    return c;
}

inline SymMat operator-(const SymMat& a, const SymMat& b) {
    SymMat c = SymMat::zero(a.d);
    for (int i = 0; i < a.d; ++i)
        for (int j = 0; j < a.d; ++j) c.m[i][j] = a.m[i][j] - b.m[i][j];
    return c;
}

inline SymMat operator*(double s, const SymMat& a) {
    SymMat c = SymMat::zero(a.d);
    for (int i = 0; i < a.d; ++i)
        for (int j = 0; j < a.d; ++j) c.m[i][j] = s * a.m[i][j];
    return c;
}

inline double max_abs_entry(const SymMat& a) {
    double v = 0.0;
    for (int i = 0; i < a.d; ++i)
        for (int j = 0; j < a.d; ++j) v = std::max(v, std::abs(a.m[i][j]));
    return v;
}

inline double symmetry_defect(const SymMat& a) {
    double v = 0.0;
    for (int i = 0; i < a.d; ++i)
        for (int j = i + 1; j < a.d; ++j) v = std::max(v, std::abs(a.m[i][j] - a.m[j][i]));
    return v;
}

struct EigenSym {
    int d = 0;
    double value[kMaxDim] = {};
    double vector[kMaxDim][kMaxDim] = {};  // vector[i] is the unit eigenvector of value[i]
};

// Cyclic Jacobi rotations; plenty for d <= 4.
inline EigenSym eigen_sym(const SymMat& a_in) {
    const int d = a_in.d;
    double a[kMaxDim][kMaxDim];
    double v[kMaxDim][kMaxDim] = {};
    std::memcpy(a, a_in.m, sizeof(a));
    for (int i = 0; i < d; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < d; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenSym e;
    e.d = d;
    for (int i = 0; i < d; ++i) {
        e.value[i] = a[i][i];
        for (int k = 0; k < d; ++k) e.vector[i][k] = v[k][i];
    }
    // sort ascending by eigenvalue
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (e.value[j] < e.value[i]) {
                std::swap(e.value[i], e.value[j]);
                for (int k = 0; k < d; ++k) std::swap(e.vector[i][k], e.vector[j][k]);
            }
    return e;
}

inline double min_eigenvalue(const SymMat& a) { return eigen_sym(a).value[0]; }
inline double max_eigenvalue(const SymMat& a) { return eigen_sym(a).value[a.d - 1]; }

inline double determinant(const SymMat& a) {
    EigenSym e = eigen_sym(a);
    double det = 1.0;
    for (int i = 0; i < a.d; ++i) det *= e.value[i];
    return det;
}

}  // namespace latgas

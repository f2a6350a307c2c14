// Experiment harness: named observables, the headline experiment runners
// (variance decay, SEP per-level decay, semigroup homogenization gap), and
// plot-ready CSV + JSON manifest output. Every runner is deterministic given
// its configuration, seeds included.
#pragma once

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "latgas/exact_generator.hpp"
#include "latgas/heat_kernel.hpp"
#include "latgas/homogenize.hpp"
#include "latgas/mc.hpp"
#include "latgas/rates.hpp"
#include "latgas/version.hpp"
#include "latgas/walk_design.hpp"

namespace latgas {

using nlohmann::json;

// --- observables ------------------------------------------------------------------

// Accepted forms:
//   {"kind":"site", "x":[0]}                        eta_x
//   {"kind":"centered", "x":[0]}                    eta_x - rho
//   {"kind":"product", "sites":[[0],[1]]}           product of occupations
//   {"kind":"centered_product", "sites":[...]}      product of (eta_x - rho)
//   {"kind":"gradient", "x":[0], "axis":0}          eta_x - eta_{x+e_axis}
//   {"kind":"table", "support":[[..]..], "values":[...]}
inline LocalFunction parse_observable(const json& j, int dim, double rho) {
    auto coord_of = [dim](const json& v) {
        if (!v.is_array() || int(v.size()) != dim)
            throw ConfigError("observable: site must be an array of dim coordinates");
        Coord c{};
        for (int i = 0; i < dim; ++i) c[i] = v[size_t(i)].get<int>();
        return c;
    };
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("observable: expected an object with a kind");
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "site") return LocalFunction::occupation(dim, coord_of(j.at("x")));
    if (kind == "centered") return LocalFunction::centered(dim, coord_of(j.at("x")), rho);
    if (kind == "product" || kind == "centered_product") {
        LocalFunction f = LocalFunction::constant(dim, 1.0);
        for (const json& v : j.at("sites"))
            f = f * (kind == "product" ? LocalFunction::occupation(dim, coord_of(v))
                                       : LocalFunction::centered(dim, coord_of(v), rho));
        return f;
    }
    if (kind == "gradient") {
        const Coord x = coord_of(j.at("x"));
        const int axis = j.value("axis", 0);
        return LocalFunction::occupation(dim, x) -
               LocalFunction::occupation(dim, add(x, unit(axis)));
    }
    if (kind == "table") {
        std::vector<Coord> supp;
        for (const json& v : j.at("support")) supp.push_back(coord_of(v));
        std::vector<double> vals = j.at("values").get<std::vector<double>>();
        return LocalFunction(dim, supp, vals);
    }
    throw ConfigError("observable: unknown kind " + kind);
}

inline json chaos_to_json(const ChaosCoeffs& c) {
    json levels = json::object();
    for (int n = 0; n <= c.max_level(); ++n) {
        if (c.levels[n].empty()) continue;
        json entries = json::array();
        for (const auto& [y, v] : c.levels[n]) {
            json sites = json::array();
            for (const Coord& x : y) {
                json xc = json::array();
                for (int i = 0; i < c.dim; ++i) xc.push_back(x[i]);
                sites.push_back(xc);
            }
            entries.push_back(json::array({sites, v}));
        }
        levels[std::to_string(n)] = entries;
    }
    return json{{"rho", c.rho}, {"dim", c.dim}, {"levels", levels}};
}

inline ChaosCoeffs chaos_from_json(const json& j) {
    ChaosCoeffs c;
    c.rho = j.at("rho").get<double>();
    c.dim = j.at("dim").get<int>();
    for (const auto& [key, entries] : j.at("levels").items()) {
        for (const json& e : entries) {
            SiteSet y;
            for (const json& xc : e[0]) {
                Coord x{};
                for (int i = 0; i < c.dim; ++i) x[i] = xc[size_t(i)].get<int>();
                y.push_back(x);
            }
            std::sort(y.begin(), y.end());
            if (int(y.size()) != std::stoi(key))
                throw ConfigError("chaos json: level/key size mismatch");
            c.set(y, e[1].get<double>());
        }
    }
    return c;
}

inline json kernel_to_json(const JumpKernel& q) {
    json out = json::array();
    for (const auto& [y, rate] : q.entries()) {
        json off = json::array();
        for (int i = 0; i < q.dim(); ++i) off.push_back(y[i]);
        out.push_back(json{{"offset", off}, {"rate", rate}});
    }
    return out;
}

inline JumpKernel kernel_from_json(const json& j, int dim) {
    if (j.is_object() && j.contains("kind")) {
        const std::string kind = j["kind"].get<std::string>();
        if (kind == "nearest_neighbor")
            return JumpKernel::nearest_neighbor(dim, j.value("rate", 0.5));
        throw ConfigError("kernel: unknown kind " + kind);
    }
    std::map<Coord, double> rates;
    for (const json& e : j) {
        Coord y{};
        const json& off = e.at("offset");
        for (int i = 0; i < dim; ++i) y[i] = off[size_t(i)].get<int>();
        rates[y] += e.at("rate").get<double>();
    }
    return JumpKernel(dim, std::move(rates));
}

// --- output ------------------------------------------------------------------------

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct RunOutput {
    std::string csv_header;
    std::vector<std::vector<double>> rows;
    json extra;  // experiment-specific summary entries for the manifest

    void write(const std::string& path, const json& config, double runtime_seconds) const {
        {
            std::ofstream os(path);
            if (!os) throw ConfigError("cannot open output file " + path);
            os << csv_header << "\n";
            os << std::setprecision(15);
            for (const auto& row : rows) {
                for (size_t i = 0; i < row.size(); ++i)
                    os << row[i] << (i + 1 < row.size() ? "," : "");
                os << "\n";
            }
        }
        json manifest;
        manifest["config"] = config;
        std::ostringstream canon;
        canon << config;
        manifest["config_hash"] = fnv1a(canon.str());
        manifest["version"] = kVersion;
        manifest["runtime_seconds"] = runtime_seconds;
        manifest["rows"] = rows.size();
        manifest["summary"] = extra;
        std::ofstream ms(path + ".manifest.json");
        if (!ms) throw ConfigError("cannot open manifest file");
        ms << manifest.dump(2) << "\n";
    }
};

// --- variance decay ----------------------------------------------------------------

struct VarianceDecayConfig {
    std::string rates = "kind=ssep";
    int dim = 1;
    int side = 512;
    double rho = 0.5;
    std::vector<double> t_grid = {250, 500, 1000};
    json observable = json{{"kind", "site"}, {"x", {0}}};
    int64_t replicas = 100000;
    uint64_t seed = 1;
    int corrector_scale = 2;       // largest m for the D_bar surrogate
    std::string path = "auto";     // auto | spectral | dense | mc
    double reg_epsilon = 0.5;      // MC path: K(t) = floor(pref * t^{(1-eps)/2})
    double reg_prefactor = 1.0;
    bool regularize = true;        // MC path: average the observable over Lambda_K
    int threads = 0;

    json to_json() const {
        return json{{"rates", rates},       {"dim", dim},
                    {"side", side},         {"rho", rho},
                    {"t_grid", t_grid},     {"observable", observable},
                    {"replicas", replicas}, {"seed", seed},
                    {"corrector_scale", corrector_scale},
                    {"path", path},         {"reg_epsilon", reg_epsilon},
                    {"reg_prefactor", reg_prefactor},
                    {"regularize", regularize}};
    }

    static VarianceDecayConfig from_json(const json& j) {
        VarianceDecayConfig c;
        c.rates = j.value("rates", c.rates);
        c.dim = j.value("dim", c.dim);
        c.side = j.value("side", c.side);
        c.rho = j.value("rho", c.rho);
        if (j.contains("t_grid")) c.t_grid = j["t_grid"].get<std::vector<double>>();
        if (j.contains("observable")) c.observable = j["observable"];
        c.replicas = j.value("replicas", c.replicas);
        c.seed = j.value("seed", c.seed);
        c.corrector_scale = j.value("corrector_scale", c.corrector_scale);
        c.path = j.value("path", c.path);
        c.reg_epsilon = j.value("reg_epsilon", c.reg_epsilon);
        c.reg_prefactor = j.value("reg_prefactor", c.reg_prefactor);
        c.regularize = j.value("regularize", c.regularize);
        return c;
    }
};

// Per-level exact variance of the SEP flow of u: level 1 through the scalar
// heat flow, levels >= 2 through the K_n exclusion Laplacian.
inline std::vector<double> sep_variance_by_level(const Torus& torus, const JumpKernel& q,
                                                 const ChaosCoeffs& chaos, double t,
                                                 int max_level) {
    const double chi = compressibility(chaos.rho);
    std::vector<double> by_level(size_t(max_level) + 1, 0.0);
    for (int n = 1; n <= std::min(max_level, chaos.max_level()); ++n) {
        if (chaos.levels[n].empty()) continue;
        if (n == 1) {
            std::vector<double> g(size_t(torus.num_sites()), 0.0);
            for (const auto& [y, v] : chaos.levels[1]) g[size_t(torus.index(y[0]))] += v;
            const auto gt = heat_evolve(q, torus, g, t);
            by_level[1] = chi * l2_norm_sq(gt);
        } else {
            SubsetSpace ks(torus, n);
            std::vector<double> f(size_t(ks.size()), 0.0);
            for (const auto& [y, v] : chaos.levels[n]) {
                std::vector<int64_t> ids;
                for (const Coord& x : y) ids.push_back(torus.index(x));
                std::sort(ids.begin(), ids.end());
                f[size_t(ks.rank(ids))] += v;
            }
            const auto ft = evolve_exclusion(q, ks, f, t, 1e-12);
            by_level[size_t(n)] = std::pow(chi, n) * l2_norm_sq(ft);
        }
    }
    return by_level;
}

struct VarianceDecayResult {
    RunOutput output;
    double u_prime = 0.0;
    double chi = 0.0;
    SymMat d_bar;
    std::string path_used;
};

inline VarianceDecayResult run_variance_decay(const VarianceDecayConfig& cfg) {
    RateFamily rf = RateFamily::build(rule_from_spec(cfg.dim, cfg.rates));
    Torus torus(cfg.dim, cfg.side);
    LocalFunction u = parse_observable(cfg.observable, cfg.dim, cfg.rho);

    VarianceDecayResult res;
    res.chi = compressibility(cfg.rho);
    res.u_prime = rho_derivative(u, cfg.rho, 1);
    res.d_bar =
        diffusion_matrix(rf, cfg.rho, Cube::triadic(cfg.dim, coord_zero(), cfg.corrector_scale))
            .d_bar;
    const double det_d = determinant(res.d_bar);

    auto prediction = [&](double t) {
        return res.u_prime * res.u_prime * res.chi /
               std::sqrt(std::pow(8.0 * M_PI * t, cfg.dim) * det_d);
    };

    std::string path = cfg.path;
    if (path == "auto") {
        if (rf.is_constant())
            path = "spectral";
        else if (torus.num_sites() <= kMaxSupportBits)
            path = "dense";
        else
            path = "mc";
    }
    res.path_used = path;

    RunOutput& out = res.output;
    out.csv_header = "t,var,stderr,prediction,ratio,reg_radius,replicas";

    if (path == "spectral") {
        if (!rf.is_constant())
            throw ConfigError("variance-decay: spectral path needs constant rates");
        const JumpKernel q = JumpKernel::nearest_neighbor(cfg.dim, rf.constant_rate());
        ChaosCoeffs chaos = chaos_coeffs(u, cfg.rho);
        for (double t : cfg.t_grid) {
            const auto by_level = sep_variance_by_level(torus, q, chaos, t, 3);
            double var = 0.0;
            for (double v : by_level) var += v;
            out.rows.push_back({t, var, 0.0, prediction(t), var / prediction(t), 0.0, 0.0});
        }
    } else if (path == "dense") {
        StateSpace space = StateSpace::full(torus);
        SparseOperator op = build_generator(space, rf);
        const std::vector<double> w = space.weights(cfg.rho);
        const auto dense = dense_of_local(space, u);
        for (double t : cfg.t_grid) {
            const auto pt = apply_semigroup(op, t, dense, 1e-11);
            const double var = variance(w, pt);
            out.rows.push_back({t, var, 0.0, prediction(t), var / prediction(t), 0.0, 0.0});
        }
    } else if (path == "mc") {
        std::vector<Observable> observables;
        std::vector<double> radii;
        for (double t : cfg.t_grid) {
            const int k = cfg.regularize
                              ? int(std::floor(cfg.reg_prefactor *
                                               std::pow(t, 0.5 * (1.0 - cfg.reg_epsilon))))
                              : 0;
            observables.emplace_back(torus, u, k);
            radii.push_back(double(k));
        }
        VarianceRun run = estimate_variance_grid(torus, rf, cfg.rho, cfg.t_grid, observables,
                                                 cfg.replicas, cfg.seed, true, cfg.threads);
        for (size_t i = 0; i < run.points.size(); ++i) {
            const VarianceEstimate& e = run.points[i];
            out.rows.push_back({e.t, e.value, e.stderr_jack, prediction(e.t),
                                e.value / prediction(e.t), radii[i], double(e.replicas)});
        }
    } else {
        throw ConfigError("variance-decay: unknown path " + path);
    }

    out.extra = json{{"u_prime", res.u_prime},
                     {"chi", res.chi},
                     {"d_bar_det", det_d},
                     {"d_bar_11", res.d_bar(0, 0)},
                     {"path", res.path_used}};
    return res;
}

// --- SEP per-level decay -------------------------------------------------------------

struct SepDecayConfig {
    int dim = 1;
    int side = 256;
    double rho = 0.5;
    json kernel = json{{"kind", "nearest_neighbor"}, {"rate", 0.5}};
    json observable = json{{"kind", "centered"}, {"x", {0}}};
    std::vector<double> t_grid = {10, 20, 40, 80};
    int max_level = 3;

    json to_json() const {
        return json{{"dim", dim},           {"side", side},   {"rho", rho},
                    {"kernel", kernel},     {"observable", observable},
                    {"t_grid", t_grid},     {"max_level", max_level}};
    }
    static SepDecayConfig from_json(const json& j) {
        SepDecayConfig c;
        c.dim = j.value("dim", c.dim);
        c.side = j.value("side", c.side);
        c.rho = j.value("rho", c.rho);
        if (j.contains("kernel")) c.kernel = j["kernel"];
        if (j.contains("observable")) c.observable = j["observable"];
        if (j.contains("t_grid")) c.t_grid = j["t_grid"].get<std::vector<double>>();
        c.max_level = j.value("max_level", c.max_level);
        return c;
    }
};

inline RunOutput run_sep_decay(const SepDecayConfig& cfg) {
    Torus torus(cfg.dim, cfg.side);
    JumpKernel q = kernel_from_json(cfg.kernel, cfg.dim);
    LocalFunction u = parse_observable(cfg.observable, cfg.dim, cfg.rho);
    ChaosCoeffs chaos = chaos_coeffs(u, cfg.rho);
    const SymMat d_mat = 0.5 * covariance(q);
    const double det_d = determinant(d_mat);
    const double u_prime = rho_derivative(u, cfg.rho, 1);
    const double chi = compressibility(cfg.rho);

    RunOutput out;
    out.csv_header = "t,var_total,level1,level2,level3,prediction,ratio_level1";
    for (double t : cfg.t_grid) {
        const auto by_level = sep_variance_by_level(torus, q, chaos, t, cfg.max_level);
        double total = 0.0;
        for (double v : by_level) total += v;
        const double pred =
            u_prime * u_prime * chi / std::sqrt(std::pow(8.0 * M_PI * t, cfg.dim) * det_d);
        std::vector<double> row = {t, total};
        for (int n = 1; n <= 3; ++n)
            row.push_back(n < int(by_level.size()) ? by_level[size_t(n)] : 0.0);
        row.push_back(pred);
        row.push_back(pred > 0.0 ? by_level[1] / pred : 0.0);
        out.rows.push_back(row);
    }
    out.extra = json{{"u_prime", u_prime}, {"chi", chi}, {"d_det", det_d}};
    return out;
}

// --- homogenization gap ---------------------------------------------------------------

struct HomogGapConfig {
    std::string rates = "kind=neighbor_weighted,a=0.5";
    int dim = 1;
    int side = 12;
    double rho = 0.5;
    json observable = json{{"kind", "centered"}, {"x", {0}}};
    std::vector<double> t_grid = {0.5, 1, 2, 4, 8};
    int corrector_scale = 1;
    int reg_radius = 1;  // regularization R_K radius for the averaged column

    json to_json() const {
        return json{{"rates", rates}, {"dim", dim},       {"side", side},
                    {"rho", rho},     {"observable", observable},
                    {"t_grid", t_grid},                   {"corrector_scale", corrector_scale},
                    {"reg_radius", reg_radius}};
    }
    static HomogGapConfig from_json(const json& j) {
        HomogGapConfig c;
        c.rates = j.value("rates", c.rates);
        c.dim = j.value("dim", c.dim);
        c.side = j.value("side", c.side);
        c.rho = j.value("rho", c.rho);
        if (j.contains("observable")) c.observable = j["observable"];
        if (j.contains("t_grid")) c.t_grid = j["t_grid"].get<std::vector<double>>();
        c.corrector_scale = j.value("corrector_scale", c.corrector_scale);
        c.reg_radius = j.value("reg_radius", c.reg_radius);
        return c;
    }
};

// SEP kernel matched to the family's diffusion matrix, sized to the torus:
// constant rates get the exact nearest-neighbor match; otherwise the compact
// two-shell realization in d = 1, or the general construction when it fits.
inline JumpKernel matched_sep_kernel(const RateFamily& rf, const SymMat& d_bar,
                                     const Torus& torus) {
    if (rf.is_constant()) return JumpKernel::nearest_neighbor(rf.dim(), rf.constant_rate());
    if (rf.dim() == 1) {
        JumpKernel q = compact_kernel_1d(2.0 * d_bar(0, 0));
        if (torus.side() > 2 * q.radius()) return q;
    }
    JumpKernel q = sep_for_diffusion(d_bar);
    if (torus.side() <= 2 * q.radius())
        throw ConfigError("matched SEP kernel does not fit the torus; enlarge the side");
    return q;
}

inline RunOutput run_homogenization_gap(const HomogGapConfig& cfg) {
    RateFamily rf = RateFamily::build(rule_from_spec(cfg.dim, cfg.rates));
    Torus torus(cfg.dim, cfg.side);
    if (torus.num_sites() > kMaxSupportBits)
        throw SizeError("homog-gap: torus too large for exact semigroups");
    StateSpace space = StateSpace::full(torus);
    const std::vector<double> w = space.weights(cfg.rho);
    SparseOperator op_l = build_generator(space, rf);
    DiffusionEstimate est = diffusion_matrix(
        rf, cfg.rho, Cube::triadic(cfg.dim, coord_zero(), cfg.corrector_scale));
    JumpKernel q = matched_sep_kernel(rf, est.d_bar, torus);
    SparseOperator op_lbar = build_sep_generator(space, q);

    LocalFunction u = parse_observable(cfg.observable, cfg.dim, cfg.rho);
    const auto f = dense_of_local(space, u);
    const auto f_reg = dense_of_local(space, regularize(u, cfg.reg_radius, &torus));

    RunOutput out;
    out.csv_header = "t,gap,gap_regularized";
    std::vector<double> log_t, log_gap;
    for (double t : cfg.t_grid) {
        auto gap_of = [&](const std::vector<double>& v) {
            const auto a = apply_semigroup(op_l, t, v, 1e-12);
            const auto b = apply_semigroup(op_lbar, t, v, 1e-12);
            std::vector<double> diff(a.size());
            for (size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
            return std::sqrt(inner(w, diff, diff));
        };
        const double gap = gap_of(f);
        const double gap_reg = gap_of(f_reg);
        out.rows.push_back({t, gap, gap_reg});
        if (gap > 1e-14) {
            log_t.push_back(std::log(t));
            log_gap.push_back(std::log(gap));
        }
    }
    double slope = 0.0;
    if (log_t.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int n = int(log_t.size());
        for (int i = 0; i < n; ++i) {
            sx += log_t[size_t(i)];
            sy += log_gap[size_t(i)];
            sxx += log_t[size_t(i)] * log_t[size_t(i)];
            sxy += log_t[size_t(i)] * log_gap[size_t(i)];
        }
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    out.extra = json{{"d_bar_11", est.d_bar(0, 0)},
                     {"kernel", kernel_to_json(q)},
                     {"log_log_slope", slope}};
    return out;
}

}  // namespace latgas

// Command-line front end: wires the library modules into the headline
// experiments and emits plot-ready CSV tables with JSON manifests.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric non-convergence.

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "latgas/experiments.hpp"

using namespace latgas;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    json j;
    is >> j;
    return j;
}

json maybe_config(const std::string& path) {
    return path.empty() ? json::object() : load_json(path);
}

double now_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void emit_json(const json& out, const std::string& out_path,
               const json& config = json::object(), double runtime_seconds = 0.0) {
    if (out_path.empty()) {
        std::cout << out.dump(2) << "\n";
        return;
    }
    std::ofstream os(out_path);
    if (!os) throw ConfigError("cannot open output file " + out_path);
    os << out.dump(2) << "\n";
    json manifest;
    manifest["config"] = config;
    std::ostringstream canon;
    canon << config;
    manifest["config_hash"] = fnv1a(canon.str());
    manifest["version"] = kVersion;
    manifest["runtime_seconds"] = runtime_seconds;
    std::ofstream ms(out_path + ".manifest.json");
    ms << manifest.dump(2) << "\n";
}

int cmd_validate_rates(const std::string& rates, int dim) {
    RateRule rule = rule_from_spec(dim, rates);
    ValidationReport rep = validate_rule(rule);
    std::cout << "family: " << rule.spec << " (dim " << dim << ", range " << rule.range
              << ", lambda " << rule.lambda << ")\n";
    std::cout << "validation: " << rep.to_string(dim) << "\n";
    if (!rep.ok) throw ConfigError("rate family failed validation");
    return 0;
}

int cmd_cov2walk(const std::string& matrix_path, const std::string& out_path) {
    auto start = std::chrono::steady_clock::now();
    json j = load_json(matrix_path);
    const json& rows = j.contains("matrix") ? j["matrix"] : j;
    const int d = int(rows.size());
    if (d < 1 || d > kMaxDim) throw ConfigError("cov2walk: bad matrix dimension");
    SymMat m = SymMat::zero(d);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) m(i, k) = rows[size_t(i)][size_t(k)].get<double>();
    emit_json(kernel_to_json(kernel_from_covariance(m)), out_path, j, now_seconds(start));
    return 0;
}

int cmd_heat_asymptotics(const json& cfg, const std::string& out_path) {
    const int dim = cfg.value("dim", 1);
    const int side = cfg.value("side", 512);
    Torus torus(dim, side);
    JumpKernel q = cfg.contains("kernel") ? kernel_from_json(cfg["kernel"], dim)
                                          : JumpKernel::nearest_neighbor(dim, 0.5);
    std::vector<double> t_grid =
        cfg.contains("t_grid")
            ? cfg["t_grid"].get<std::vector<double>>()
            : std::vector<double>{50, 100, 150, 200, 250, 300, 350, 400, 450, 500};
    std::vector<double> f(size_t(torus.num_sites()), 0.0);
    if (cfg.contains("initial")) {
        for (const json& e : cfg["initial"]) {
            Coord c{};
            for (int i = 0; i < dim; ++i) c[i] = e.at("x")[size_t(i)].get<int>();
            f[size_t(torus.index(c))] += e.at("value").get<double>();
        }
    } else {
        f[0] = 1.0;
    }
    auto start = std::chrono::steady_clock::now();
    RunOutput out;
    out.csv_header = "t,l2_norm,gaussian_prediction,gap,rescaled_gap";
    for (double t : t_grid) {
        NashComparison r = nash_compare(q, torus, f, t);
        out.rows.push_back({r.t, r.l2_norm, r.gaussian_prediction, r.gap, r.rescaled_gap});
    }
    out.extra = json{{"covariance_det", determinant(covariance(q))}};
    out.write(out_path, cfg, now_seconds(start));
    return 0;
}

int cmd_chaos(const json& cfg, const std::string& out_path) {
    const int dim = cfg.value("dim", 1);
    const double rho = cfg.value("rho", 0.5);
    auto start = std::chrono::steady_clock::now();
    LocalFunction u = parse_observable(cfg.at("observable"), dim, rho);
    emit_json(chaos_to_json(chaos_coeffs(u, rho)), out_path, cfg, now_seconds(start));
    return 0;
}

int cmd_diffusion_matrix(const std::string& rates, int dim, double rho, int m,
                         const std::string& out_path) {
    auto start = std::chrono::steady_clock::now();
    RateFamily rf = RateFamily::build(rule_from_spec(dim, rates));
    Cube cube = Cube::triadic(dim, coord_zero(), m);
    std::vector<CorrectorSolution> sols;
    DiffusionEstimate est = diffusion_matrix(rf, rho, cube, &sols);
    json d_rows = json::array(), c_rows = json::array();
    for (int i = 0; i < dim; ++i) {
        json dr = json::array(), cr = json::array();
        for (int k = 0; k < dim; ++k) {
            dr.push_back(est.d_bar(i, k));
            cr.push_back(est.conductivity(i, k));
        }
        d_rows.push_back(dr);
        c_rows.push_back(cr);
    }
    json nu = json::array(), l2 = json::array(), dual = json::array();
    for (int i = 0; i < dim; ++i) {
        nu.push_back(est.nu_axis[i]);
        l2.push_back(est.l2_phi[i]);
        dual.push_back(flux_dual_norm(rf, sols[size_t(i)], est.d_bar));
    }
    emit_json(json{{"rho", rho},
                   {"m", m},
                   {"nu_bar", nu},
                   {"D_bar", d_rows},
                   {"conductivity", c_rows},
                   {"l2_phi", l2},
                   {"flux_dual_norm", dual},
                   {"extra_kernel_dim", est.extra_kernel_dim}},
              out_path, json{{"rates", rates}, {"dim", dim}, {"rho", rho}, {"m", m}},
              now_seconds(start));
    return 0;
}

int cmd_simulate(const json& cfg, const std::string& out_path) {
    const int dim = cfg.value("dim", 1);
    const int side = cfg.value("side", 64);
    const double rho = cfg.value("rho", 0.5);
    RateFamily rf =
        RateFamily::build(rule_from_spec(dim, cfg.value("rates", std::string("kind=ssep"))));
    Torus torus(dim, side);
    LocalFunction u = parse_observable(
        cfg.value("observable", json{{"kind", "site"}, {"x", {0}}}), dim, rho);
    std::vector<double> t_grid = cfg.contains("t_grid")
                                     ? cfg["t_grid"].get<std::vector<double>>()
                                     : std::vector<double>{1.0};
    const int64_t replicas = cfg.value("replicas", int64_t(10000));
    const uint64_t seed = cfg.value("seed", uint64_t(1));
    const bool horizon = cfg.value("enforce_horizon", true);

    auto start = std::chrono::steady_clock::now();
    std::vector<Observable> obs(t_grid.size(), Observable(torus, u, cfg.value("reg_radius", 0)));
    VarianceRun run = estimate_variance_grid(torus, rf, rho, t_grid, obs, replicas, seed, horizon);
    RunOutput out;
    out.csv_header = "t,estimate,stderr,replicas";
    for (const VarianceEstimate& e : run.points)
        out.rows.push_back({e.t, e.value, e.stderr_jack, double(e.replicas)});
    out.write(out_path, cfg, now_seconds(start));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for lattice-gas relaxation"};
    app.require_subcommand(1);

    std::string config_path, out_path, rates = "kind=ssep", matrix_path;
    int dim = 1, scale_m = 1;
    double rho = 0.5;

    auto* validate = app.add_subcommand("validate-rates", "check a rate family's hypotheses");
    validate->add_option("--rates", rates, "family spec, e.g. kind=neighbor_weighted,a=0.5")
        ->required();
    validate->add_option("--dim", dim, "lattice dimension");

    auto* cov2walk = app.add_subcommand("cov2walk", "jump kernel realizing a covariance matrix");
    cov2walk->add_option("--matrix", matrix_path, "JSON file with the target matrix")->required();
    cov2walk->add_option("--out", out_path, "output JSON path (stdout if omitted)");

    auto* heat = app.add_subcommand("heat-asymptotics", "heat-flow l2 norms vs the Gaussian law");
    heat->add_option("--config", config_path, "JSON config");
    heat->add_option("--out", out_path, "output CSV path")->required();

    auto* chaos = app.add_subcommand("chaos", "chaos coefficients of an observable");
    chaos->add_option("--config", config_path, "JSON config with observable, rho, dim")
        ->required();
    chaos->add_option("--out", out_path, "output JSON path (stdout if omitted)");

    auto* diff = app.add_subcommand("diffusion-matrix", "finite-volume diffusion matrix");
    diff->add_option("--rates", rates, "family spec")->required();
    diff->add_option("--rho", rho, "density")->required();
    diff->add_option("--m", scale_m, "triadic scale")->required();
    diff->add_option("--dim", dim, "lattice dimension");
    diff->add_option("--out", out_path, "output JSON path (stdout if omitted)");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo variance estimates");
    sim->add_option("--config", config_path, "JSON config");
    sim->add_option("--out", out_path, "output CSV path")->required();

    auto* vdecay = app.add_subcommand("variance-decay", "variance decay against the Gaussian law");
    vdecay->add_option("--config", config_path, "JSON config");
    vdecay->add_option("--out", out_path, "output CSV path")->required();

    auto* sdecay = app.add_subcommand("sep-decay", "per-level SEP variance decay");
    sdecay->add_option("--config", config_path, "JSON config");
    sdecay->add_option("--out", out_path, "output CSV path")->required();

    auto* hgap = app.add_subcommand("homog-gap", "semigroup gap to the matched SEP");
    hgap->add_option("--config", config_path, "JSON config");
    hgap->add_option("--out", out_path, "output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate_rates(rates, dim);
        if (cov2walk->parsed()) return cmd_cov2walk(matrix_path, out_path);
        if (heat->parsed()) return cmd_heat_asymptotics(maybe_config(config_path), out_path);
        if (chaos->parsed()) return cmd_chaos(load_json(config_path), out_path);
        if (diff->parsed()) return cmd_diffusion_matrix(rates, dim, rho, scale_m, out_path);
        if (sim->parsed()) return cmd_simulate(maybe_config(config_path), out_path);
        if (vdecay->parsed()) {
            auto start = std::chrono::steady_clock::now();
            VarianceDecayConfig cfg = VarianceDecayConfig::from_json(maybe_config(config_path));
            VarianceDecayResult res = run_variance_decay(cfg);
            res.output.write(out_path, cfg.to_json(), now_seconds(start));
            return 0;
        }
        if (sdecay->parsed()) {
            auto start = std::chrono::steady_clock::now();
            SepDecayConfig cfg = SepDecayConfig::from_json(maybe_config(config_path));
            RunOutput out = run_sep_decay(cfg);
            out.write(out_path, cfg.to_json(), now_seconds(start));
            return 0;
        }
        if (hgap->parsed()) {
            auto start = std::chrono::steady_clock::now();
            HomogGapConfig cfg = HomogGapConfig::from_json(maybe_config(config_path));
            RunOutput out = run_homogenization_gap(cfg);
            out.write(out_path, cfg.to_json(), now_seconds(start));
            return 0;
        }
    } catch (const ConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

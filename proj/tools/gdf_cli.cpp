// Command-line driver for the RS curves, the finite-size BP experiments and
// the exhaustive L0 comparison. Output is CSV (17 significant digits, schema
// versioned by the leading comment line) or, with --json, the same rows as a
// JSON array. Exit codes: 0 success, 2 usage error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gdf/gdf.hpp"

namespace {

constexpr const char* kSchemaVersion = "gdf-csv v1";

struct Grid {
    double start = 0.0, stop = 0.0;
    int count = 0;
};

Grid parse_grid(const std::string& s) {
    Grid g;
    char c1 = 0, c2 = 0;
    std::istringstream is(s);
    if (!(is >> g.start >> c1 >> g.stop >> c2 >> g.count) || c1 != ':' || c2 != ':' ||
        g.count < 0)
        throw CLI::ValidationError("grid", "expected start:stop:count, got '" + s + "'");
    return g;
}

std::vector<double> grid_points(const Grid& g) {
    std::vector<double> pts;
    if (g.count == 1) {
        pts.push_back(g.start);
        return pts;
    }
    for (int i = 0; i < g.count; ++i)
        pts.push_back(g.start + (g.stop - g.start) * double(i) / double(g.count - 1));
    return pts;
}

gdf::EnsembleSpec parse_ensemble(const std::string& s) {
    gdf::EnsembleSpec spec;
    if (s == "iid") return spec;
    if (s.rfind("ex1:", 0) == 0) {
        spec.kind = gdf::EnsembleSpec::Kind::Ex1;
        spec.c = std::stod(s.substr(4));
        return spec;
    }
    if (s.rfind("ex2:", 0) == 0) {
        spec.kind = gdf::EnsembleSpec::Kind::Ex2;
        spec.T = std::stoi(s.substr(4));
        return spec;
    }
    throw CLI::ValidationError("--ensemble", "expected iid, ex1:c or ex2:T, got '" + s + "'");
}

// A row is an ordered list of (column, value-as-json). Doubles are rendered
// with 17 significant digits in the CSV path.
using Row = std::vector<std::pair<std::string, nlohmann::json>>;

std::string fmt(const nlohmann::json& v) {
    if (v.is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") != std::string::npos) {
            std::string q = "\"";
            for (char c : s) {
                if (c == '"') q += '"';
                q += c;
            }
            q += '"';
            return q;
        }
        return s;
    }
    return v.dump();
}

void emit(std::ostream& os, const std::string& command, const std::vector<std::string>& cols,
          const std::vector<Row>& rows, bool json) {
    if (json) {
        nlohmann::json out;
        out["schema"] = kSchemaVersion;
        out["command"] = command;
        out["rows"] = nlohmann::json::array();
        for (const auto& r : rows) {
            nlohmann::json o;
            for (const auto& [k, v] : r) o[k] = v;
            out["rows"].push_back(std::move(o));
        }
        os << out.dump(2) << "\n";
        return;
    }
    os << "# " << kSchemaVersion << " command=" << command << "\n";
    for (size_t j = 0; j < cols.size(); ++j) os << (j ? "," : "") << cols[j];
    os << "\n";
    for (const auto& r : rows) {
        for (size_t j = 0; j < r.size(); ++j) os << (j ? "," : "") << fmt(r[j].second);
        os << "\n";
    }
}

struct OutputTarget {
    std::ofstream file;
    std::ostream& stream(const std::string& path) {
        if (path.empty()) return std::cout;
        file.open(path);
        if (!file) throw CLI::ValidationError("--out", "cannot open '" + path + "'");
        return file;
    }
};

gdf::Penalty family_of(const std::string& name, double eta2, double a, double lambda) {
    if (name == "l1") return gdf::L1{1.0};
    if (name == "en") return gdf::ElasticNet{1.0, eta2};
    if (name == "l0") return gdf::L0{1.0};
    if (name == "scad") return gdf::Scad{1.0, a, lambda};
    throw CLI::ValidationError("--penalty", "expected l1, en, l0 or scad, got '" + name + "'");
}

double penalty_strength(const gdf::Penalty& p) {
    return std::visit(
        [](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, gdf::ElasticNet>)
                return q.eta1;
            else if constexpr (std::is_same_v<T, gdf::L2>)
                return q.eta2;
            else
                return q.eta;
        },
        p);
}

int cmd_rs_curve(const std::string& penalty, double eta2, double a, double lambda, double alpha,
                 double my, double sy2, const std::string& grid_s, const std::string& out,
                 bool json) {
    const gdf::ModelParams mp{alpha, my, sy2};
    const gdf::Penalty family = family_of(penalty, eta2, a, lambda);
    const auto deltas = grid_points(parse_grid(grid_s));
    const auto sweep = gdf::sweep_delta(family, mp, deltas);

    const std::vector<std::string> cols{
        "delta", "eta", "Q",  "chi",       "Qhat",    "chihat",  "rho_hat", "branch", "rs_stable",
        "at_stable", "df", "err_train", "err_pre", "aic", "f", "r_bar", "ok", "error"};
    std::vector<Row> rows;
    for (const auto& r : sweep) {
        Row row;
        row.emplace_back("delta", r.delta);
        row.emplace_back("eta", penalty_strength(r.penalty));
        row.emplace_back("Q", r.sol.state.Q);
        row.emplace_back("chi", r.sol.state.chi);
        row.emplace_back("Qhat", r.sol.state.Qhat);
        row.emplace_back("chihat", r.sol.state.chihat);
        row.emplace_back("rho_hat", r.sol.rho_hat);
        row.emplace_back("branch", gdf::branch_name(r.sol.branch));
        row.emplace_back("rs_stable", int(r.sol.rs_locally_stable));
        row.emplace_back("at_stable", int(r.sol.at_stable));
        row.emplace_back("df", r.obs.df);
        row.emplace_back("err_train", r.obs.err_train);
        row.emplace_back("err_pre", r.obs.err_pre);
        row.emplace_back("aic", r.obs.aic);
        row.emplace_back("f", r.obs.free_energy);
        row.emplace_back("r_bar", r.obs.r_bar);
        row.emplace_back("ok", int(r.ok));
        row.emplace_back("error", r.error);
        rows.push_back(std::move(row));
    }
    OutputTarget tgt;
    emit(tgt.stream(out), "rs-curve", cols, rows, json);
    return 0;
}

int cmd_bp(const std::string& penalty, double eta2, double a, double lambda, int N, int M,
           double my, double sy2, const std::string& ensemble_s, int samples,
           const std::string& grid_s, double damping, double tol, long max_iter, bool sure,
           std::uint64_t seed, int threads, const std::string& out, bool json) {
    const double alpha = double(M) / double(N);
    const gdf::ModelParams mp{alpha, my, sy2};
    const gdf::Penalty family = family_of(penalty, eta2, a, lambda);
    const auto spec = parse_ensemble(ensemble_s);
    const auto deltas = grid_points(parse_grid(grid_s));
    gdf::BPOptions opts;
    opts.damping = damping;
    opts.tol = tol;
    opts.max_iter = max_iter;

    const std::vector<std::string> cols{"delta",    "eta",       "df_cov",     "df_sure",
                                        "delta_eff_bp", "df_rs", "convergence_rate",
                                        "mean_iters", "nonconverged", "ok", "error"};
    std::vector<Row> rows;
    std::optional<gdf::RSState> warm;
    for (size_t k = 0; k < deltas.size(); ++k) {
        const double d = deltas[k];
        Row row;
        row.emplace_back("delta", d);
        try {
            const gdf::Penalty p = gdf::eta_for_delta(family, mp, d, warm);
            const auto sol = gdf::solve_rs(p, mp, warm);
            if (!sol.divergent()) warm = sol.state;
            const auto obs = gdf::observables(p, mp, sol);
            const auto res = gdf::run_bp_ensemble(p, N, M, my, sy2, spec, samples, seed + k,
                                                  opts, threads);
            double df_sure = gdf::kNaN;
            if (sure) {
                gdf::Instance inst;
                inst.A = gdf::make_predictors(spec, M, N, seed + k);
                inst.y = gdf::gen_y(M, my, sy2, seed + k + 1);
                df_sure = gdf::gdf_sure_fd(inst, p, opts, 1e-6 * std::sqrt(sy2));
            }
            row.emplace_back("eta", penalty_strength(p));
            row.emplace_back("df_cov", res.df_cov);
            row.emplace_back("df_sure", df_sure);
            row.emplace_back("delta_eff_bp", res.delta_eff);
            row.emplace_back("df_rs", obs.df);
            row.emplace_back("convergence_rate", res.convergence_rate);
            row.emplace_back("mean_iters", res.mean_iters);
            row.emplace_back("nonconverged", samples - res.converged_count);
            row.emplace_back("ok", 1);
            row.emplace_back("error", "");
        } catch (const std::exception& e) {
            row.emplace_back("eta", gdf::kNaN);
            row.emplace_back("df_cov", gdf::kNaN);
            row.emplace_back("df_sure", gdf::kNaN);
            row.emplace_back("delta_eff_bp", gdf::kNaN);
            row.emplace_back("df_rs", gdf::kNaN);
            row.emplace_back("convergence_rate", 0.0);
            row.emplace_back("mean_iters", 0.0);
            row.emplace_back("nonconverged", samples);
            row.emplace_back("ok", 0);
            row.emplace_back("error", std::string(e.what()));
        }
        rows.push_back(std::move(row));
    }
    OutputTarget tgt;
    emit(tgt.stream(out), "bp", cols, rows, json);
    return 0;
}

int cmd_l0_exact(int N, double alpha, const std::string& grid_s, int samples,
                 std::uint64_t seed, int threads, const std::string& out, bool json) {
    const gdf::ModelParams mp{alpha, 0.0, 1.0};
    const auto etas = grid_points(parse_grid(grid_s));

    const std::vector<std::string> cols{"eta", "mean_delta", "df_exact", "df_rs", "ok", "error"};
    std::vector<Row> rows;
    for (size_t k = 0; k < etas.size(); ++k) {
        const double eta = etas[k];
        Row row;
        row.emplace_back("eta", eta);
        try {
            const auto ex = gdf::exact_gdf_l0(mp, N, eta, samples, seed + 7919 * k, threads);
            double df_rs = gdf::kNaN;
            try {
                const auto sol = gdf::solve_rs(gdf::L0{eta}, mp);
                df_rs = gdf::gdf(sol);
            } catch (const std::exception&) {
            }
            row.emplace_back("mean_delta", ex.mean_delta);
            row.emplace_back("df_exact", ex.df);
            row.emplace_back("df_rs", df_rs);
            row.emplace_back("ok", 1);
            row.emplace_back("error", "");
        } catch (const std::exception& e) {
            row.emplace_back("mean_delta", gdf::kNaN);
            row.emplace_back("df_exact", gdf::kNaN);
            row.emplace_back("df_rs", gdf::kNaN);
            row.emplace_back("ok", 0);
            row.emplace_back("error", std::string(e.what()));
        }
        rows.push_back(std::move(row));
    }
    OutputTarget tgt;
    emit(tgt.stream(out), "l0-exact", cols, rows, json);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RS saddle-point curves, finite-size BP experiments and exhaustive L0 search"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "",
                   "key=value file preloading any flag under a [subcommand] "
                   "section (flags override)");

    std::string penalty = "l1", ensemble = "iid", grid, out;
    double eta2 = 0.1, a = 5.0, lambda = 1.0, alpha = 0.5, my = 0.0, sy2 = 1.0;
    double damping = 0.5, tol = 1e-10;
    int N = 200, M = 100, samples = 100, threads = 0;
    long max_iter = 100000;
    std::uint64_t seed = 1;
    bool json = false, sure = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out, "output path (default: stdout)");
        sub->add_flag("--json", json, "emit a JSON array instead of CSV");
        sub->add_option("--threads", threads, "worker cap (0 = hardware)");
    };

    auto* rs = app.add_subcommand("rs-curve", "RS observables on a delta grid");
    rs->add_option("--penalty", penalty, "l1|en|l0|scad")->capture_default_str();
    rs->add_option("--eta2", eta2, "elastic-net ridge weight")->capture_default_str();
    rs->add_option("--a", a, "SCAD shape a (> 2)")->capture_default_str();
    rs->add_option("--lambda", lambda, "SCAD threshold scale")->capture_default_str();
    rs->add_option("--alpha", alpha, "M/N ratio")->capture_default_str();
    rs->add_option("--my", my, "data mean")->capture_default_str();
    rs->add_option("--sy2", sy2, "data variance")->capture_default_str();
    rs->add_option("--delta-grid", grid, "start:stop:count")->required();
    add_common(rs);

    auto* bp = app.add_subcommand("bp", "finite-size BP GDF estimators on a delta grid");
    bp->add_option("--penalty", penalty, "l1|en|scad")->capture_default_str();
    bp->add_option("--eta2", eta2, "elastic-net ridge weight")->capture_default_str();
    bp->add_option("--a", a, "SCAD shape a (> 2)")->capture_default_str();
    bp->add_option("--lambda", lambda, "SCAD threshold scale")->capture_default_str();
    bp->add_option("--N", N, "number of predictors")->capture_default_str();
    bp->add_option("--M", M, "number of samples")->capture_default_str();
    bp->add_option("--my", my, "data mean")->capture_default_str();
    bp->add_option("--sy2", sy2, "data variance")->capture_default_str();
    bp->add_option("--ensemble", ensemble, "iid | ex1:c | ex2:T")->capture_default_str();
    bp->add_option("--samples", samples, "ensemble size")->capture_default_str();
    bp->add_option("--delta-grid", grid, "start:stop:count")->required();
    bp->add_option("--damping", damping, "BP damping in (0,1]")->capture_default_str();
    bp->add_option("--tol", tol, "BP convergence tolerance")->capture_default_str();
    bp->add_option("--max-iter", max_iter, "BP iteration budget")->capture_default_str();
    bp->add_flag("--sure", sure, "also compute the finite-difference SURE estimate");
    bp->add_option("--seed", seed, "master seed")->capture_default_str();
    add_common(bp);

    auto* l0 = app.add_subcommand("l0-exact", "exhaustive best-subset GDF on an eta grid");
    l0->add_option("--N", N, "number of predictors (<= 50)")->capture_default_str();
    l0->add_option("--alpha", alpha, "M/N ratio")->capture_default_str();
    l0->add_option("--eta-grid", grid, "start:stop:count")->required();
    l0->add_option("--samples", samples, "ensemble size (> 0)")->capture_default_str();
    l0->add_option("--seed", seed, "master seed")->capture_default_str();
    add_common(l0);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (rs->parsed()) return cmd_rs_curve(penalty, eta2, a, lambda, alpha, my, sy2, grid,
                                              out, json);
        if (bp->parsed())
            return cmd_bp(penalty, eta2, a, lambda, N, M, my, sy2, ensemble, samples, grid,
                          damping, tol, max_iter, sure, seed, threads, out, json);
        if (l0->parsed()) {
            if (samples <= 0) {
                std::cerr << "l0-exact: --samples must be positive\n";
                return 2;
            }
            return cmd_l0_exact(N, alpha, grid, samples, seed, threads, out, json);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

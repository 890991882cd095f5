#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "selfsim/diagnostics.hpp"
#include "selfsim/elliptic.hpp"
#include "selfsim/evolve.hpp"
#include "selfsim/homokernel.hpp"
#include "selfsim/scenario_io.hpp"
#include "selfsim/spectrum.hpp"
#include "selfsim/svg.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace selfsim;

namespace {

fs::path out_dir(const std::string& flag) {
    if (const char* env = std::getenv("SELFSIM_OUT"); env && *env) return fs::path(env);
    return fs::path(flag);
}

void write_text(const fs::path& p, const std::string& s) { detail::write_file_atomic(p, s); }

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string fmt(double v) { return detail::format_double(v); }

// JSON cannot hold inf/nan; map them to strings so the document stays valid.
json jnum(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    ss.imbue(std::locale::classic());
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            v.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidArgument, "bad number in list: '" + tok + "'");
        }
    }
    if (v.empty()) throw Error(ErrorKind::InvalidArgument, "empty list");
    return v;
}

MatrixSpec coefficient_from_flags(const std::string& coeff, int n, double b, const std::string& shape_file) {
    if (coeff == "identity") return MatrixSpec::identity(n);
    if (coeff == "ms" || coeff == "meyers_serrin") return MatrixSpec::meyers_serrin(n, b);
    if (coeff == "shape") {
        std::ifstream is(shape_file);
        if (!is) throw Error(ErrorKind::Io, "cannot open shape file '" + shape_file + "'");
        json j;
        try {
            j = json::parse(is);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::InvalidArgument, std::string("shape file is not valid JSON: ") + e.what());
        }
        return construct_from_shape(detail::parse_shape(j, n));
    }
    throw Error(ErrorKind::InvalidArgument, "unknown coefficient '" + coeff + "'");
}

// ---- spectrum --------------------------------------------------------------------------

struct SpectrumOpts {
    int n = 2;
    std::vector<double> b;
    double b_min = 0, b_max = 5;
    int b_steps = 101;
    int ell_max = 4, k_max = 4;
};

int run_spectrum(const SpectrumOpts& o, const fs::path& out) {
    std::vector<double> bs = o.b;
    if (bs.empty()) {
        if (o.b_steps < 2) throw Error(ErrorKind::InvalidArgument, "--b-steps must be >= 2");
        for (int i = 0; i < o.b_steps; ++i) bs.push_back(o.b_min + (o.b_max - o.b_min) * i / (o.b_steps - 1));
    }
    std::vector<double> kept;
    for (double b : bs)
        if (b > 0.0) kept.push_back(b);
    const auto table = figure2_table(o.n, kept, o.ell_max, o.k_max);
    std::string csv = "n,b,ell,k,lag_alpha,gamma,lambda\n";
    std::map<std::pair<int, int>, PlotSeries> curves;
    for (const auto& e : table) {
        csv += std::to_string(e.index.n) + "," + fmt(e.index.b) + "," + std::to_string(e.index.ell) + "," +
               std::to_string(e.index.k) + "," + fmt(e.lag_alpha) + "," + fmt(e.gamma) + "," + fmt(e.lambda) + "\n";
        auto& c = curves[{e.index.ell, e.index.k}];
        c.label = "l=" + std::to_string(e.index.ell) + " k=" + std::to_string(e.index.k);
        c.points.emplace_back(e.index.b, e.lambda);
    }
    write_text(out / "spectrum.csv", csv);
    std::vector<PlotSeries> series;
    for (auto& [key, c] : curves)
        if (key.second <= 1) series.push_back(std::move(c));
    write_text(out / "spectrum.svg",
               emit_plot(series, {"Eigenvalues, n = " + std::to_string(o.n), "b", "lambda", false, 640, 420}));
    json summary;
    summary["n"] = o.n;
    summary["modes"] = table.size();
    summary["b_values"] = kept;
    summary["skipped_b_values"] = bs.size() - kept.size();
    summary["spectral_gap"] = json::array();
    for (double b : kept) summary["spectral_gap"].push_back(jnum(spectral_gap(o.n, b, o.ell_max, o.k_max)));
    write_json(out / "spectrum.json", summary);
    return 0;
}

// ---- phi ------------------------------------------------------------------------------

template <class G>
json phi_report(const MatrixSpec& A, const G& grid, const fs::path& out, double tau_max) {
    const auto res = compute_phi(A, grid, tau_max);
    const auto gb = gaussian_bound_check(res.phi);
    json j;
    j["residual"] = res.residual;
    j["mass"] = integral(res.phi);
    j["C_lower"] = jnum(gb.C_lower);
    j["C_upper"] = jnum(gb.C_upper);
    j["gaussian_bounds_finite"] = gb.finite();
    j["grid"] = {{"R", grid.R}, {"N", grid.N}, {"radial", G::is_radial}, {"dim", grid.dim()}};
    bool gaussian_expected = A.is_identity() || std::holds_alternative<MatrixSpec::MeyersSerrin>(A.kind());
    if (gaussian_expected) {
        double dev = 0, mx = 0;
        const int n = grid.dim();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double r = grid.radius(i);
            if (r > grid.R - 4.0) continue;
            const double g = gaussian_profile(n, r);
            dev = std::max(dev, std::abs(res.phi[i] - g));
            mx = std::max(mx, g);
        }
        j["gaussian_max_deviation"] = dev / mx;
        j["gaussian_region_radius"] = grid.R - 4.0;
    }
    std::string hist = "tau,residual\n";
    PlotSeries s{"residual", {}};
    for (const auto& [t, r] : res.residual_history) {
        hist += fmt(t) + "," + fmt(r) + "\n";
        s.points.emplace_back(t, r);
    }
    write_text(out / "phi_residual.csv", hist);
    write_text(out / "phi_residual.svg", emit_plot({s}, {"Stationarity residual", "tau", "residual", true, 640, 420}));
    write_field_binary(out / "phi.bin", res.phi);
    if constexpr (G::is_radial) write_text(out / "phi.csv", field_to_csv(res.phi));
    else if (grid.size() <= 70000) write_text(out / "phi.csv", field_to_csv(res.phi));
    return j;
}

// ---- evolve / report --------------------------------------------------------------------

struct RunOutputs {
    json summary;
    std::vector<std::pair<double, double>> w_norm;
    std::vector<std::pair<double, double>> mass;
    std::vector<std::pair<double, double>> e0;
    RateEstimate rate;
    bool has_rate = false;
    double equivalence = 0;
};

double limit_beta(const MatrixSpec& A) {
    const auto L = A.limit();
    if (auto ms = std::get_if<MatrixSpec::MeyersSerrin>(&L.kind())) return beta_upper(L.dim(), ms->b);
    return 1.0;
}

double perturbation_nu(const MatrixSpec& A) {
    if (auto p = std::get_if<MatrixSpec::Perturbed>(&A.kind())) return p->nu;
    return std::numeric_limits<double>::infinity();
}

template <class G>
RunOutputs run_scenario(const Scenario<G>& sc, const fs::path& out, bool diagnostics) {
    const auto traj = evolve_scenario(sc);
    RunOutputs ro;
    const int n = sc.grid.dim();
    json index;
    index["snapshots"] = json::array();
    fs::create_directories(out / "snapshots");
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "snap_%05zu.bin", i);
        write_field_binary(out / "snapshots" / name, traj.snapshots[i].second);
        index["snapshots"].push_back({{"tau", traj.snapshots[i].first}, {"file", std::string("snapshots/") + name}});
    }
    write_json(out / "trajectory.json", index);

    std::string mcsv = "tau,alpha\n";
    for (const auto& [t, a] : traj.mass_series) mcsv += fmt(t) + "," + fmt(a) + "\n";
    write_text(out / "mass.csv", mcsv);
    ro.mass = traj.mass_series;

    std::string e0csv = "tau,e0\n";
    for (const auto& [t, v] : traj.snapshots) {
        const double e0 = energy_e(v, 0.0, sc.delta);
        e0csv += fmt(t) + "," + fmt(e0) + "\n";
        ro.e0.emplace_back(t, e0);
    }
    write_text(out / "e0.csv", e0csv);

    ro.summary["steps"] = traj.mass_series.size() - 1;
    ro.summary["snapshots"] = traj.snapshots.size();
    ro.summary["alpha_initial"] = traj.mass_series.front().second;
    ro.summary["alpha_final"] = traj.mass_series.back().second;
    if (!diagnostics) return ro;

    const auto phi = compute_phi(sc.matrix.limit(), sc.grid).phi;
    EllipticSolve<G> prob{sc.matrix.limit(), sc.grid, 1e-8, false};
    const auto trace = antiderivative_trace(traj, prob, phi, sc.m, sc.delta, sc.kappa);
    write_text(out / "energy.csv", energy_trace_csv(trace));
    ro.w_norm = trace.series(&EnergyRow::w_norm);
    ro.equivalence = trace.equivalence_constant();
    PlotSeries s{"w_norm", ro.w_norm};
    write_text(out / "decay.svg", emit_plot({s}, {"Deviation from alpha phi", "tau", "||w||_{L2(m)}", true, 640, 420}));
    try {
        ro.rate = decay_rate(ro.w_norm);
        ro.has_rate = true;
    } catch (const Error& e) {
        ro.summary["rate_error"] = e.what();
    }
    const double nu = perturbation_nu(sc.matrix), beta = limit_beta(sc.matrix);
    const bool nonlinear = sc.nonlinearity.kind != NonlinearitySpec::Kind::None;
    const double pred = nonlinear ? predicted_rate(RateKind::Nonlinear, sc.m, n, nu, beta, sc.nonlinearity.sigma)
                                  : predicted_rate(RateKind::Linear, sc.m, n, nu, beta);
    ro.rate.prediction = pred;
    if (ro.has_rate)
        ro.summary["rate"] = {{"mu_hat", ro.rate.mu_hat},
                              {"window", {ro.rate.tau_a, ro.rate.tau_b}},
                              {"fit_quality", ro.rate.fit_quality},
                              {"prediction", pred}};
    ro.summary["predicted_rate"] = pred;
    ro.summary["equivalence_constant"] = ro.equivalence;
    ro.summary["max_W_residual"] = trace.max_W_residual();
    return ro;
}

template <class G>
json report_flags(const Scenario<G>& sc, const RunOutputs& ro) {
    const int n = sc.grid.dim();
    json flags = json::object();
    const bool linear = sc.nonlinearity.kind == NonlinearitySpec::Kind::None;
    if (linear) {
        const double a0 = ro.mass.front().second;
        double worst = 0;
        for (const auto& [t, a] : ro.mass) worst = std::max(worst, std::abs(a - a0));
        flags["mass_conservation"] = {{"criterion", "linear mass conservation"},
                                      {"value", worst / std::max(std::abs(a0), 1e-300)},
                                      {"threshold", 1e-6},
                                      {"pass", worst <= 1e-6 * std::abs(a0)}};
        double slope = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < ro.e0.size(); ++i)
            slope = std::max(slope, (std::log(ro.e0[i].second) - std::log(ro.e0[i - 1].second)) /
                                        (ro.e0[i].first - ro.e0[i - 1].first));
        flags["e0_growth"] = {{"criterion", "e0 growth bound"},
                              {"value", jnum(slope)},
                              {"threshold", 0.5 * n + 1e-3},
                              {"pass", slope <= 0.5 * n + 1e-3}};
    }
    if (ro.has_rate) {
        flags["rate_ceiling"] = {{"criterion", "decay rate below predicted bound"},
                                 {"value", ro.rate.mu_hat},
                                 {"threshold", 1.2 * ro.rate.prediction},
                                 {"pass", ro.rate.mu_hat <= 1.2 * ro.rate.prediction}};
        flags["fit_quality"] = {{"criterion", "exponential decay fit"},
                                {"value", ro.rate.fit_quality},
                                {"threshold", 0.95},
                                {"pass", ro.rate.fit_quality >= 0.95}};
    }
    if (ro.equivalence > 0)
        flags["energy_equivalence"] = {{"criterion", "combined energy equivalent to e"},
                                       {"value", ro.equivalence},
                                       {"threshold", 50.0},
                                       {"pass", ro.equivalence <= 50.0}};
    return flags;
}

// ---- elliptic / counterexample --------------------------------------------------------

void write_ratio_outputs(const fs::path& out, const std::string& stem, const std::vector<WeightedEstimateReport>& reps) {
    std::string csv = "R,input_norm,output_norm,ratio\n";
    PlotSeries s{"ratio", {}};
    for (const auto& r : reps) {
        csv += fmt(r.R) + "," + fmt(r.input_norm) + "," + fmt(r.output_norm) + "," + fmt(r.ratio) + "\n";
        s.points.emplace_back(std::log(r.R), r.ratio);
    }
    write_text(out / (stem + ".csv"), csv);
    write_text(out / (stem + ".svg"), emit_plot({s}, {"Truncated weighted ratio", "log R", "ratio", true, 640, 420}));
}

int exit_code_for(const Error& e) { return is_validation_error(e.kind()) ? 1 : 2; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Long-time asymptotics toolkit for rescaled parabolic problems"};
    app.require_subcommand(1);
    std::string out_flag = "out";
    app.add_option("--out", out_flag, "output directory (SELFSIM_OUT overrides)");

    SpectrumOpts sp;
    auto* c_spec = app.add_subcommand("spectrum", "closed-form eigenvalue table");
    c_spec->add_option("--n", sp.n)->check(CLI::IsMember({2, 3}));
    c_spec->add_option("--b", sp.b, "explicit b values")->delimiter(',');
    c_spec->add_option("--b-min", sp.b_min);
    c_spec->add_option("--b-max", sp.b_max);
    c_spec->add_option("--b-steps", sp.b_steps);
    c_spec->add_option("--ell-max", sp.ell_max);
    c_spec->add_option("--k-max", sp.k_max);

    std::string phi_coeff = "identity", phi_shape, phi_grid = "auto";
    int phi_n = 2, phi_N = 0;
    double phi_b = 0.5, phi_R = 12.0, phi_tau = 20.0;
    auto* c_phi = app.add_subcommand("phi", "principal eigenfunction");
    c_phi->add_option("--coeff", phi_coeff)->check(CLI::IsMember({"identity", "ms", "meyers_serrin", "shape"}));
    c_phi->add_option("--n", phi_n)->check(CLI::IsMember({2, 3}));
    c_phi->add_option("--b", phi_b);
    c_phi->add_option("--shape", phi_shape, "JSON file with shape samples");
    c_phi->add_option("--grid", phi_grid)->check(CLI::IsMember({"auto", "cartesian", "radial"}));
    c_phi->add_option("--R", phi_R);
    c_phi->add_option("--N", phi_N);
    c_phi->add_option("--tau-max", phi_tau);

    std::string ev_config;
    bool ev_no_diag = false;
    auto* c_ev = app.add_subcommand("evolve", "run one scenario");
    c_ev->add_option("--config", ev_config)->required();
    c_ev->add_flag("--no-diagnostics", ev_no_diag);

    std::string el_coeff = "ms", el_radii = "10,20,40,80";
    double el_b = 0.05, el_m = 2.0;
    auto* c_el = app.add_subcommand("elliptic", "truncated weighted-estimate sweep");
    c_el->add_option("--coeff", el_coeff)->check(CLI::IsMember({"ms", "identity"}));
    c_el->add_option("--b", el_b);
    c_el->add_option("--m", el_m);
    c_el->add_option("--radii", el_radii);

    std::string yk = "stein-weiss";
    double ya = 0.5, yb = 0.5, yl = 1.0, yp = 2.0, yq = 0.0, ym = 1.0;
    int yn = 3, ytrials = 100;
    std::uint64_t yseed = 1;
    auto* c_y = app.add_subcommand("young", "homogeneous-kernel constants and bound check");
    c_y->add_option("--kernel", yk)->check(CLI::IsMember({"stein-weiss", "hardy"}));
    c_y->add_option("--a", ya);
    c_y->add_option("--b", yb);
    c_y->add_option("--lambda", yl);
    c_y->add_option("--m", ym, "exponent of the Hardy-type kernel");
    c_y->add_option("--n", yn)->check(CLI::IsMember({2, 3}));
    c_y->add_option("--p", yp);
    c_y->add_option("--q", yq, "optional; derived from p when omitted");
    c_y->add_option("--trials", ytrials);
    c_y->add_option("--seed", yseed);

    std::string ce_radii = "10,20,40,80";
    double ce_b = 0.05, ce_m = 2.0;
    bool ce_skip_identity = false;
    auto* c_ce = app.add_subcommand("counterexample", "sharpness counterexample for the weighted estimate");
    c_ce->add_option("--b", ce_b);
    c_ce->add_option("--m", ce_m);
    c_ce->add_option("--radii", ce_radii);
    c_ce->add_flag("--skip-identity-check", ce_skip_identity);

    std::string rp_config;
    auto* c_rp = app.add_subcommand("report", "run a scenario and check it against predictions");
    c_rp->add_option("--config", rp_config)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const fs::path out = out_dir(out_flag);
    try {
        if (*c_spec) return run_spectrum(sp, out);

        if (*c_phi) {
            const auto A = coefficient_from_flags(phi_coeff, phi_n, phi_b, phi_shape);
            json j;
            std::string grid = phi_grid;
            if (grid == "auto") grid = (phi_n == 3 && A.is_rotation_invariant()) ? "radial" : "cartesian";
            if (grid == "radial") {
                if (!A.is_rotation_invariant()) throw Error(ErrorKind::Unsupported, "radial grid needs a rotation-invariant coefficient");
                j = phi_report(A, RadialGrid{phi_n, phi_R, phi_N > 0 ? phi_N : 400}, out, phi_tau);
            } else if (phi_n == 2) {
                j = phi_report(A, CartesianGrid2D{phi_R, phi_N > 0 ? phi_N : 256}, out, phi_tau);
            } else {
                j = phi_report(A, CartesianGrid3D{phi_R, phi_N > 0 ? phi_N : 48}, out, phi_tau);
            }
            j["coefficient"] = phi_coeff;
            write_json(out / "phi_report.json", j);
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (*c_ev || *c_rp) {
            const std::string cfg = *c_ev ? ev_config : rp_config;
            const auto any = load_scenario(cfg);
            std::ifstream is(cfg);
            const std::string raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
            const std::string digest = hex64(fnv1a(json::parse(raw).dump()));
            return std::visit(
                [&](const auto& sc) {
                    const bool diag = *c_rp || !ev_no_diag;
                    auto ro = run_scenario(sc, out, diag);
                    ro.summary["scenario_digest"] = digest;
                    if (*c_ev) {
                        write_json(out / "summary.json", ro.summary);
                        std::cout << ro.summary.dump(2) << "\n";
                        return 0;
                    }
                    json rep;
                    rep["scenario_digest"] = digest;
                    rep["traces"] = {{"mass", "mass.csv"}, {"energy", "energy.csv"}, {"e0", "e0.csv"},
                                     {"trajectory", "trajectory.json"}};
                    rep["summary"] = ro.summary;
                    rep["flags"] = report_flags(sc, ro);
                    bool all = true;
                    for (const auto& [k, v] : rep["flags"].items()) all = all && v["pass"].template get<bool>();
                    rep["all_pass"] = all;
                    write_json(out / "report.json", rep);
                    std::cout << rep.dump(2) << "\n";
                    return 0;
                },
                any);
        }

        if (*c_el) {
            const auto radii = parse_list(el_radii);
            const double b = el_coeff == "identity" ? 1.0 : el_b;
            const auto reps = counterexample_ratios(3, b, el_m, radii);
            write_ratio_outputs(out, "elliptic", reps);
            json j;
            j["coefficient"] = el_coeff;
            j["b"] = b;
            j["m"] = el_m;
            j["a"] = counterexample_a(3, b);
            j["growth_exponent"] = ratio_growth_exponent(reps);
            write_json(out / "elliptic.json", j);
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (*c_y) {
            const HomKernel k = yk == "hardy" ? hardy_kernel(yn, ym) : stein_weiss(ya, yb, yl, yn);
            const ExponentPair pr = yq > 0.0 ? exponent_pair(k, yp, yq) : exponent_pair(k, yp);
            const double k1 = kappa1(k, pr), k2 = kappa2(k, pr);
            const auto bc = bound_check(k, pr, ytrials, yseed);
            json j;
            j["kappa1"] = k1;
            j["kappa2"] = k2;
            j["bound"] = bc.bound;
            j["max_ratio"] = bc.max_ratio;
            j["trials"] = bc.trials;
            j["p"] = pr.p;
            j["q"] = jnum(pr.q);
            j["degree"] = k.degree();
            write_json(out / "young.json", j);
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (*c_ce) {
            const auto radii = parse_list(ce_radii);
            const auto res = counterexample_ms(ce_b, ce_m, radii, !ce_skip_identity);
            write_ratio_outputs(out, "counterexample", res.reports);
            const auto ctrl = counterexample_ratios(3, 1.0, ce_m, radii);
            write_ratio_outputs(out, "counterexample_identity", ctrl);
            json j;
            j["a"] = res.a;
            j["b"] = ce_b;
            j["m"] = ce_m;
            j["growth_exponent"] = res.growth_exponent;
            j["predicted_exponent"] = res.predicted_exponent;
            j["relative_deviation"] = std::abs(res.growth_exponent - res.predicted_exponent) / res.predicted_exponent;
            j["identity_control_exponent"] = ratio_growth_exponent(ctrl);
            if (!ce_skip_identity) j["discrete_identity_residual"] = res.identity_residual;
            write_json(out / "counterexample.json", j);
            std::cout << j.dump(2) << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "selfsim: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "selfsim: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

// mewls_cli: dataset generation, fitting, diagnostics, image restoration,
// contour and box-counting output. See README.md for usage.
//
// Every subcommand takes --config <file.json> whose keys are the long flag
// names; flags given on the command line override the file. The effective
// parameters are written to manifest.json in the output directory.
//
// Exit codes: 0 ok, 2 configuration/input error, 3 solver failure, 4 I/O.

#include "mewls/data.hpp"
#include "mewls/diagnostics.hpp"
#include "mewls/entropy.hpp"
#include "mewls/image.hpp"
#include "mewls/io/csv.hpp"
#include "mewls/io/field.hpp"
#include "mewls/io/png.hpp"
#include "mewls/mewls.hpp"
#include "mewls/phantom.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mewls;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;
constexpr const char* kOutEnv = "MEWLS_OUT_DIR";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Options of one subcommand, settable by flag or config key.
class Params {
public:
    template <class T>
    CLI::Option* add(CLI::App* app, const std::string& key, T& var, const std::string& help,
                     bool positional = false) {
        CLI::Option* opt = nullptr;
        if constexpr (std::is_same_v<T, bool>) {
            opt = app->add_flag("--" + key, var, help);
        } else {
            opt = app->add_option(positional ? key : "--" + key, var, help)->capture_default_str();
        }
        entries_.push_back({key, opt, [&var] { return json(var); },
                            [&var](const json& j) { var = j.get<T>(); }});
        return opt;
    }

    void add_config_option(CLI::App* app) {
        app->add_option("--config", config_path_, "JSON file with option values (keys = long flag names)");
    }

    /// Fill every option not given on the command line from the config file.
    void apply_config() {
        if (config_path_.empty()) return;
        std::ifstream in(config_path_);
        if (!in) throw io::IoError("cannot open config '" + config_path_ + "'");
        json cfg;
        try {
            cfg = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config '" + config_path_ + "': " + e.what());
        }
        if (!cfg.is_object()) throw ConfigError("config '" + config_path_ + "' must be a JSON object");
        for (const auto& [key, value] : cfg.items()) {
            auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
            if (it == entries_.end()) throw ConfigError("config '" + config_path_ + "': unknown key '" + key + "'");
            if (it->opt->count() > 0) continue;
            try {
                it->set(value);
            } catch (const json::exception&) {
                throw ConfigError("config '" + config_path_ + "': key '" + key + "' has the wrong type");
            }
        }
    }

    json effective() const {
        json out = json::object();
        for (const auto& e : entries_) out[e.key] = e.get();
        return out;
    }

private:
    struct Entry {
        std::string key;
        CLI::Option* opt;
        std::function<json()> get;
        std::function<void(const json&)> set;
    };
    std::vector<Entry> entries_;
    std::string config_path_;
};

std::string default_out_dir() {
    const char* env = std::getenv(kOutEnv);
    return env && *env ? env : ".";
}

fs::path prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw io::IoError("cannot create output directory '" + dir + "'");
    return fs::path(dir);
}

void write_json(const fs::path& path, const json& j) { io::write_text(path.string(), j.dump(2) + "\n"); }

void write_manifest(const fs::path& dir, const std::string& command, const Params& params,
                    const std::vector<std::string>& outputs, json extra = json::object()) {
    json m;
    m["command"] = command;
    m["parameters"] = params.effective();
    m["outputs"] = outputs;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_json(dir / "manifest.json", m);
}

// --------------------------------------------------------------------------
// shared option groups

struct DataOptions {
    std::string data;
    std::string generator = "franke";
    std::uint64_t seed = 7;
    int n_clean = 1000;
    int n_outliers = 150;
    double sigma = 1e-3;
    double perturb = 0.5;
    double max_factor = 4.0;
    bool perturb_poles = false;

    void add(Params& p, CLI::App* app) {
        p.add(app, "data", data, "dataset CSV (overrides the generator)");
        p.add(app, "generator", generator, "synthetic dataset: franke or sphere")
            ->check(CLI::IsMember({"franke", "sphere"}));
        p.add(app, "seed", seed, "generator seed");
        p.add(app, "n-clean", n_clean, "franke: clean samples");
        p.add(app, "n-outliers", n_outliers, "franke: outliers uniform in the unit cube");
        p.add(app, "sigma", sigma, "franke: noise standard deviation");
        p.add(app, "perturb", perturb, "sphere: fraction of perturbed points");
        p.add(app, "max-factor", max_factor, "sphere: largest radial factor");
        p.add(app, "perturb-poles", perturb_poles, "sphere: allow the poles to be perturbed");
    }

    bool franke_reference() const { return data.empty() && generator == "franke"; }

    SyntheticConfig franke_config() const {
        SyntheticConfig c;
        c.seed = seed;
        c.n_clean = n_clean;
        c.n_outliers = n_outliers;
        c.noise_sigma = sigma;
        return c;
    }

    SphereConfig sphere_config() const {
        SphereConfig c;
        c.seed = seed;
        c.perturb_fraction = perturb;
        c.max_radial_factor = max_factor;
        c.perturb_poles = perturb_poles;
        return c;
    }

    Dataset load() const {
        if (!data.empty()) {
            try {
                return io::read_dataset_csv(data);
            } catch (const InvalidInput& e) {
                throw io::IoError(std::string("malformed dataset: ") + e.what());
            }
        }
        if (generator == "sphere") return generate_sphere_dataset(sphere_config()).data;
        return generate_franke_dataset(franke_config()).data;
    }
};

struct SplineOptions {
    int n1 = 10;
    int n2 = 10;
    int degree = 3;
    bool closed = false;

    void add(Params& p, CLI::App* app) {
        p.add(app, "n1", n1, "control points along u (independent rows when closed)");
        p.add(app, "n2", n2, "control points along v");
        p.add(app, "degree", degree, "spline degree");
        p.add(app, "closed", closed, "closed in u: uniform knots, degree rows wrapped");
    }

    SurfaceSpec spec(int codim) const {
        return closed ? SurfaceSpec::closed(n1, n2, degree, codim) : SurfaceSpec::clamped(n1, n2, degree, codim);
    }
};

struct SolverOptions {
    double r = 500.0;
    std::vector<double> schedule;
    double tol = 1e-8;
    int max_iters = 500;

    void add(Params& p, CLI::App* app, double default_r) {
        r = default_r;
        p.add(app, "r", r, "terminal reduction factor MSE_uw / MSE");
        p.add(app, "schedule", schedule, "explicit continuation factors (default 1,2,5,10,... up to r)");
        p.add(app, "tol", tol, "Gauss-Seidel relative tolerance");
        p.add(app, "max-iters", max_iters, "sweeps per stage");
    }

    ContinuationSchedule continuation() const {
        if (schedule.empty()) return ContinuationSchedule::geometric(r, tol, max_iters);
        ContinuationSchedule s{schedule, tol, max_iters};
        s.validate();
        if (s.factors.back() != r) throw ConfigError("--schedule must end at the terminal factor --r");
        return s;
    }
};

json net_json(const SurfaceSpec& spec, const ControlNet& net) {
    json j;
    j["degree"] = spec.degree();
    j["n1"] = spec.n1();
    j["n2"] = spec.n2();
    j["closed_u"] = spec.closed_u();
    j["wrap_count"] = spec.wrap_count();
    j["codim"] = spec.codim();
    const auto ku = spec.knots_u().knots();
    const auto kv = spec.knots_v().knots();
    j["knots_u"] = std::vector<double>(ku.begin(), ku.end());
    j["knots_v"] = std::vector<double>(kv.begin(), kv.end());
    json rows = json::array();
    for (Eigen::Index k = 0; k < net.rows(); ++k) {
        rows.push_back(std::vector<double>(net.codim()));
        for (Eigen::Index c = 0; c < net.codim(); ++c) rows.back()[c] = net.values(k, c);
    }
    j["control_points"] = rows;  // row i + n1*j
    return j;
}

json stage_json(const FitReport& r) {
    json j;
    j["reduction"] = r.reduction;
    j["target_mse"] = r.target_mse;
    j["weighted_mse"] = r.weighted_mse;
    j["mu"] = r.mu;
    j["entropy"] = r.entropy;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["final_change"] = r.final_change;
    j["residual_normal"] = r.residual_normal;
    j["residual_mu"] = r.residual_mu;
    j["residual_weights"] = r.residual_weights;
    j["dropped_rows"] = r.dropped_rows;
    j["mu_trace"] = r.mu_trace;
    return j;
}

json stages_json(const std::vector<FitReport>& stages) {
    json a = json::array();
    for (const auto& s : stages) a.push_back(stage_json(s));
    return a;
}

// --------------------------------------------------------------------------

struct GenerateCmd {
    Params params;
    DataOptions data;
    std::string kind = "franke";
    std::string out;

    void setup(CLI::App* app) {
        params.add_config_option(app);
        params.add(app, "kind", kind, "franke or sphere", true)->check(CLI::IsMember({"franke", "sphere"}));
        params.add(app, "seed", data.seed, "generator seed");
        params.add(app, "n-clean", data.n_clean, "franke: clean samples");
        params.add(app, "n-outliers", data.n_outliers, "franke: outliers");
        params.add(app, "sigma", data.sigma, "franke: noise standard deviation");
        params.add(app, "perturb", data.perturb, "sphere: fraction of perturbed points");
        params.add(app, "max-factor", data.max_factor, "sphere: largest radial factor");
        params.add(app, "perturb-poles", data.perturb_poles, "sphere: allow the poles to be perturbed");
        out = default_out_dir();
        params.add(app, "out", out, std::string("output directory (default $") + kOutEnv + " or .)");
    }

    int run() {
        params.apply_config();
        const auto dir = prepare_out(out);
        const std::string csv = kind + ".csv";
        const std::string flags = kind + "_flags.csv";
        if (kind == "franke") {
            const auto ds = generate_franke_dataset(data.franke_config());
            io::write_dataset_csv((dir / csv).string(), ds.data);
            io::CsvTable t({"index", "outlier"});
            for (std::size_t k = 0; k < ds.outlier.size(); ++k) t.add_row({double(k), double(ds.outlier[k])});
            t.write((dir / flags).string());
            std::printf("franke: %lld points (%d outliers) -> %s\n", static_cast<long long>(ds.data.size()),
                        data.n_outliers, (dir / csv).c_str());
        } else {
            const auto ds = generate_sphere_dataset(data.sphere_config());
            io::write_dataset_csv((dir / csv).string(), ds.data);
            io::CsvTable t({"index", "perturbed", "radial_factor"});
            int count = 0;
            for (std::size_t k = 0; k < ds.perturbed.size(); ++k) {
                t.add_row({double(k), double(ds.perturbed[k]), ds.radial_factor[k]});
                count += ds.perturbed[k];
            }
            t.write((dir / flags).string());
            std::printf("sphere: %lld points (%d perturbed) -> %s\n", static_cast<long long>(ds.data.size()),
                        count, (dir / csv).c_str());
        }
        write_manifest(dir, "generate", params, {csv, flags, "manifest.json"});
        return 0;
    }
};

struct FitCmd {
    Params params;
    DataOptions data;
    SplineOptions spline;
    SolverOptions solver;
    std::string out;

    void setup(CLI::App* app) {
        params.add_config_option(app);
        data.add(params, app);
        spline.add(params, app);
        solver.add(params, app, 500.0);
        out = default_out_dir();
        params.add(app, "out", out, std::string("output directory (default $") + kOutEnv + " or .)");
    }

    int run() {
        params.apply_config();
        const auto dir = prepare_out(out);
        const Dataset ds = data.load();
        const SurfaceSpec spec = spline.spec(ds.codim());
        const FitProblem problem(spec, ds);
        const auto schedule = solver.continuation();
        const auto ols = ols_state(problem);

        json report;
        report["m"] = problem.size();
        report["codim"] = spec.codim();
        report["mse_uw"] = ols.mse_uw;
        report["terminal_reduction"] = solver.r;
        report["schedule"] = schedule.factors;

        ContinuationResult fit;
        try {
            fit = continuation_fit(problem, schedule);
        } catch (const StageFailure& e) {
            report["error"] = e.what();
            report["failed_reduction"] = e.failed_factor();
            report["stages"] = stages_json(e.stages());
            write_json(dir / "report.json", report);
            throw;
        }
        const auto& st = fit.state;
        report["stages"] = stages_json(fit.stages);
        report["final"] = {{"mu", st.mu},
                           {"entropy", entropy(st.w)},
                           {"target_mse", st.target_mse},
                           {"weighted_mse", weighted_mse(st.r2, st.w)},
                           {"constraint_error", std::abs(weighted_mse(st.r2, st.w) - st.target_mse)},
                           {"weight_sum", st.w.sum()}};
        report["entropy_trace"] = json::array();
        report["mu_per_stage"] = json::array();
        for (const auto& s : fit.stages) {
            report["entropy_trace"].push_back(s.entropy);
            report["mu_per_stage"].push_back(s.mu);
        }
        write_json(dir / "report.json", report);
        write_json(dir / "net.json", net_json(spec, st.net));

        io::CsvTable weights({"index", "w", "r2"});
        for (Eigen::Index k = 0; k < st.w.size(); ++k) weights.add_row({double(k), st.w[k], st.r2[k]});
        weights.write((dir / "weights.csv").string());

        // summary comparing r = 1 (OLS) and the terminal factor
        std::ostringstream table;
        const bool cv = data.franke_reference();
        table << "method,r,mse_uw,weighted_mse" << (cv ? ",mse_cv" : "") << "\n";
        auto row = [&](const std::string& name, double r, double mse_uw, double wmse, const ControlNet& net) {
            table << name << ',' << io::format_real(r) << ',' << io::format_real(mse_uw) << ','
                  << io::format_real(wmse);
            if (cv) table << ',' << io::format_real(cv_mse(spec, net, franke_reference()));
            table << '\n';
        };
        if (cv && data.n_outliers > 0) {
            auto clean_cfg = data.franke_config();
            clean_cfg.n_outliers = 0;
            const auto clean = ols_state(FitProblem(spec, generate_franke_dataset(clean_cfg).data));
            row("ols_clean", 1.0, clean.mse_uw, clean.mse_uw, clean.net);
        }
        row("ols", 1.0, ols.mse_uw, ols.mse_uw, ols.net);
        row("mewls", solver.r, ols.mse_uw, weighted_mse(st.r2, st.w), st.net);
        io::write_text((dir / "summary.csv").string(), table.str());

        write_manifest(dir, "fit", params, {"net.json", "weights.csv", "report.json", "summary.csv", "manifest.json"});
        std::printf("fit: m=%lld stages=%zu mu=%.6g H=%.6g\n", static_cast<long long>(problem.size()),
                    fit.stages.size(), st.mu, entropy(st.w));
        std::fputs(table.str().c_str(), stdout);
        return 0;
    }
};

struct DiagnoseCmd {
    Params params;
    DataOptions data;
    SplineOptions spline;
    std::vector<double> r_values{1, 2, 5, 10, 20, 50, 100, 200, 500};
    double tol = 1e-10;
    int max_iters = 2000;
    int max_points = 5000;
    std::string out;

    void setup(CLI::App* app) {
        params.add_config_option(app);
        data.add(params, app);
        spline.add(params, app);
        params.add(app, "r-values", r_values, "increasing reduction factors to visit");
        params.add(app, "tol", tol, "Gauss-Seidel relative tolerance");
        params.add(app, "max-iters", max_iters, "sweeps per factor");
        params.add(app, "max-points", max_points, "refuse datasets larger than this (G33 is m x m)");
        out = default_out_dir();
        params.add(app, "out", out, std::string("output directory (default $") + kOutEnv + " or .)");
    }

    int run() {
        params.apply_config();
        const auto dir = prepare_out(out);
        const Dataset ds = data.load();
        if (ds.size() > max_points) {
            throw ConfigError("diagnose: " + std::to_string(ds.size()) + " points exceed --max-points " +
                              std::to_string(max_points));
        }
        const ContinuationSchedule check{r_values, tol, max_iters};
        check.validate();
        const FitProblem problem(spline.spec(ds.codim()), ds);
        const auto ols = ols_state(problem);

        ConvergenceReport rep;
        rep.s_star = s_star(ols.r2);
        io::CsvTable rho({"r", "rho_g33", "iterations", "mu", "entropy"});
        io::CsvTable iters({"r", "iterations"});
        FitOptions opts;
        opts.tol = tol;
        opts.max_iters = max_iters;
        std::optional<MewlsState> state = ols;
        for (double r : r_values) {
            auto fit = gauss_seidel_fit(problem, ols.mse_uw / r, opts, state);
            state = std::move(fit.state);
            double value = 0.0;
            for (int c = 0; c < problem.spec().codim(); ++c) {
                value = std::max(value, spectral_radius(g33(jacobian_blocks(problem, *state, c))).value);
            }
            rep.reduction.push_back(r);
            rep.rho_g33.push_back(value);
            rep.iterations.push_back(fit.report.iterations);
            rep.entropy_trace.push_back(fit.report.entropy);
            rho.add_row({r, value, double(fit.report.iterations), state->mu, fit.report.entropy});
            iters.add_row({r, double(fit.report.iterations)});
        }
        rho.write((dir / "rho.csv").string());
        iters.write((dir / "iterations.csv").string());
        json j;
        j["m"] = problem.size();
        j["s_star"] = rep.s_star;
        j["mse_uw"] = ols.mse_uw;
        j["reduction"] = rep.reduction;
        j["rho_g33"] = rep.rho_g33;
        j["iterations"] = rep.iterations;
        j["entropy_trace"] = rep.entropy_trace;
        write_json(dir / "diagnostics.json", j);
        write_manifest(dir, "diagnose", params, {"rho.csv", "iterations.csv", "diagnostics.json", "manifest.json"});
        std::printf("s_star %s\n", io::format_real(rep.s_star).c_str());
        for (std::size_t i = 0; i < rep.reduction.size(); ++i) {
            std::printf("r=%-8g rho=%.6g iterations=%d\n", rep.reduction[i], rep.rho_g33[i], rep.iterations[i]);
        }
        return 0;
    }
};

struct RestoreCmd {
    Params params;
    std::string input;
    bool phantom = false;
    std::uint64_t seed = 5;
    int n1 = 40;
    int n2 = 60;
    int degree = 3;
    double r = 2.0;
    double threshold_div = 10.0;
    double tol = 1e-8;
    int max_iters = 500;
    std::string out;

    void setup(CLI::App* app) {
        params.add_config_option(app);
        params.add(app, "input", input, "input PNG");
        params.add(app, "phantom", phantom, "use the synthetic crack phantom instead of --input");
        params.add(app, "seed", seed, "phantom seed");
        params.add(app, "n1", n1, "control points along the width");
        params.add(app, "n2", n2, "control points along the height");
        params.add(app, "degree", degree, "spline degree");
        params.add(app, "r", r, "reduction factor");
        params.add(app, "threshold-div", threshold_div, "flag pixels with w < w_max / threshold-div");
        params.add(app, "tol", tol, "Gauss-Seidel relative tolerance");
        params.add(app, "max-iters", max_iters, "sweeps per stage");
        out = default_out_dir();
        params.add(app, "out", out, std::string("output directory (default $") + kOutEnv + " or .)");
    }

    int run() {
        params.apply_config();
        if (phantom == !input.empty()) throw ConfigError("restore: give exactly one of --input and --phantom");
        if (!(threshold_div > 1.0)) throw ConfigError("restore: --threshold-div must exceed 1");
        const auto dir = prepare_out(out);
        std::vector<std::string> outputs;
        std::optional<CrackPhantom> ph;
        ImageGrid img;
        if (phantom) {
            CrackPhantomConfig pc;
            pc.seed = seed;
            ph = make_crack_phantom(pc);
            img = ph->corrupted;
            io::write_png((dir / "corrupted.png").string(), ph->corrupted);
            io::write_png((dir / "clean.png").string(), ph->clean);
            io::write_png((dir / "cracks.png").string(), io::mask_to_image(ph->cracks));
            outputs.insert(outputs.end(), {"corrupted.png", "clean.png", "cracks.png"});
        } else {
            img = io::read_png(input);
        }

        ImageFitConfig cfg;
        cfg.n1 = n1;
        cfg.n2 = n2;
        cfg.degree = degree;
        cfg.reduction = r;
        cfg.options.tol = tol;
        cfg.options.max_iters = max_iters;
        const auto fit = fit_image(img, cfg);
        const auto field = weights_to_field(img, fit.state.w);
        const auto mask = outlier_mask(field, threshold_div);
        const auto restored = restore_image(img, mask, image_surface_spec(img, cfg), fit.state.net);

        io::write_png((dir / "restored.png").string(), restored);
        io::write_png((dir / "mask.png").string(), io::mask_to_image(mask));
        io::write_field_csv((dir / "weights.csv").string(), field);
        const double w_max = *std::max_element(field.values.begin(), field.values.end());
        json sidecar;
        sidecar["width"] = mask.width;
        sidecar["height"] = mask.height;
        sidecar["threshold_div"] = threshold_div;
        sidecar["w_max"] = w_max;
        sidecar["threshold"] = w_max / threshold_div;
        sidecar["outliers"] = mask.count();
        sidecar["density"] = mask.density();
        write_json(dir / "mask.json", sidecar);

        json stats;
        stats["pixels"] = img.pixel_count();
        stats["channels"] = img.channels;
        stats["mse_uw"] = fit.state.mse_uw;
        stats["mu"] = fit.state.mu;
        stats["entropy"] = entropy(fit.state.w);
        stats["stages"] = stages_json(fit.stages);
        if (ph) {
            std::size_t hit = 0;
            std::size_t false_pos = 0;
            const std::size_t cracks = ph->cracks.count();
            for (std::size_t p = 0; p < mask.flags.size(); ++p) {
                (ph->cracks.flags[p] ? hit : false_pos) += mask.flags[p];
            }
            auto mse = [&](const ImageGrid& a) {
                double s = 0.0;
                for (std::size_t i = 0; i < a.values.size(); ++i) {
                    s += (a.values[i] - ph->clean.values[i]) * (a.values[i] - ph->clean.values[i]);
                }
                return s / static_cast<double>(a.values.size());
            };
            stats["crack_pixels"] = cracks;
            stats["recovered_fraction"] = cracks ? double(hit) / cracks : 1.0;
            stats["false_positive_fraction"] = double(false_pos) / double(mask.flags.size() - cracks);
            stats["mse_corrupted"] = mse(ph->corrupted);
            stats["mse_restored"] = mse(restored);
        }
        write_json(dir / "stats.json", stats);
        outputs.insert(outputs.end(), {"restored.png", "mask.png", "mask.json", "weights.csv", "stats.json",
                                       "manifest.json"});
        write_manifest(dir, "restore", params, outputs);
        std::printf("restore: %dx%d, %zu outlier pixels (%.4g%%)\n", img.width, img.height, mask.count(),
                    100.0 * mask.density());
        return 0;
    }
};

/// Level from an explicit value, or w_max / threshold_div when unset.
double resolve_level(const ScalarField& f, double level, double threshold_div) {
    if (!std::isnan(level)) return level;
    if (!(threshold_div > 1.0)) throw ConfigError("--threshold-div must exceed 1");
    return *std::max_element(f.values.begin(), f.values.end()) / threshold_div;
}

ScalarField load_field(const std::string& path) {
    try {
        return io::read_field_csv(path);
    } catch (const InvalidInput& e) {
        throw io::IoError(std::string("malformed weight field: ") + e.what());
    }
}

struct ContoursCmd {
    Params params;
    std::string weights;
    double level = std::numeric_limits<double>::quiet_NaN();
    double threshold_div = 10.0;
    std::string out;

    void setup(CLI::App* app) {
        params.add_config_option(app);
        params.add(app, "weights", weights, "weight field CSV (x,y,w) as written by restore")->required();
        params.add(app, "level", level, "contour level (default w_max / threshold-div)");
        params.add(app, "threshold-div", threshold_div, "divisor used when --level is not given");
        out = default_out_dir();
        params.add(app, "out", out, std::string("output directory (default $") + kOutEnv + " or .)");
    }

    int run() {
        params.apply_config();
        if (weights.empty()) throw ConfigError("contours: --weights is required");
        const auto dir = prepare_out(out);
        const auto field = load_field(weights);
        const double lv = resolve_level(field, level, threshold_div);
        const auto lines = roi_contours(field, lv);
        std::ostringstream csv;
        csv << "id,closed,x,y\n";
        for (std::size_t id = 0; id < lines.size(); ++id) {
            for (const auto& p : lines[id].points) {
                csv << id << ',' << (lines[id].closed ? 1 : 0) << ',' << io::format_real(p.x) << ','
                    << io::format_real(p.y) << '\n';
            }
        }
        io::write_text((dir / "contours.csv").string(), csv.str());
        write_manifest(dir, "contours", params, {"contours.csv", "manifest.json"},
                       {{"level", lv}, {"polylines", lines.size()}});
        std::printf("contours: %zu polylines at level %.6g\n", lines.size(), lv);
        return 0;
    }
};

OutlierMask synthetic_set(const std::string& kind, int size) {
    if (size < 32) throw ConfigError("fractal-dim: --size must be at least 32");
    OutlierMask m{size, size, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size, 0)};
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            bool in = false;
            if (kind == "square") {
                in = true;
            } else if (kind == "line") {
                in = y == size / 2;
            } else {
                in = true;
                for (int a = x, b = y; a > 0 || b > 0; a /= 3, b /= 3) {
                    if (a % 3 == 1 && b % 3 == 1) in = false;
                }
            }
            m.flags[static_cast<std::size_t>(y) * size + x] = in ? 1 : 0;
        }
    }
    return m;
}

struct FractalCmd {
    Params params;
    std::string mask;
    std::string weights;
    std::string synthetic;
    int size = 729;
    bool boundary = false;
    double level = std::numeric_limits<double>::quiet_NaN();
    double threshold_div = 10.0;
    std::string out;

    void setup(CLI::App* app) {
        params.add_config_option(app);
        params.add(app, "mask", mask, "binary mask PNG (white = in the set)");
        params.add(app, "weights", weights, "weight field CSV; the set is {w < level}");
        params.add(app, "synthetic", synthetic, "built-in set: square, line or carpet")
            ->check(CLI::IsMember({"", "square", "line", "carpet"}));
        params.add(app, "size", size, "side of the synthetic set");
        params.add(app, "boundary", boundary, "measure the boundary of the set instead of the set");
        params.add(app, "level", level, "weights level (default w_max / threshold-div)");
        params.add(app, "threshold-div", threshold_div, "divisor used when --level is not given");
        out = default_out_dir();
        params.add(app, "out", out, std::string("output directory (default $") + kOutEnv + " or .)");
    }

    int run() {
        params.apply_config();
        const int sources = !mask.empty() + !weights.empty() + !synthetic.empty();
        if (sources != 1) throw ConfigError("fractal-dim: give exactly one of --mask, --weights, --synthetic");
        const auto dir = prepare_out(out);
        OutlierMask set;
        json extra = json::object();
        if (!mask.empty()) {
            set = io::image_to_mask(io::read_png(mask));
            if (boundary) set = morphological_boundary(set);
        } else if (!weights.empty()) {
            const auto field = load_field(weights);
            const double lv = resolve_level(field, level, threshold_div);
            extra["level"] = lv;
            set = boundary ? mass_boundary(field, lv) : threshold_below(field, lv);
        } else {
            set = synthetic_set(synthetic, size);
            if (boundary) set = morphological_boundary(set);
        }
        const auto bc = box_counting_dimension(set);
        io::CsvTable t({"box_size", "count"});
        for (std::size_t i = 0; i < bc.box_sizes.size(); ++i) t.add_row({double(bc.box_sizes[i]), double(bc.counts[i])});
        t.write((dir / "boxcount.csv").string());
        json j;
        j["dimension"] = bc.dimension;
        j["r_squared"] = bc.r_squared;
        j["pixels"] = set.count();
        for (const auto& [k, v] : extra.items()) j[k] = v;
        write_json(dir / "fractal.json", j);
        write_manifest(dir, "fractal-dim", params, {"boxcount.csv", "fractal.json", "manifest.json"});
        std::printf("fractal-dim: D=%.6g (R^2 %.6g, %zu scales)\n", bc.dimension, bc.r_squared, bc.box_sizes.size());
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MEWLS B-spline surface fitting"};
    app.require_subcommand(1);
    GenerateCmd generate;
    FitCmd fit;
    DiagnoseCmd diagnose;
    RestoreCmd restore;
    ContoursCmd contours;
    FractalCmd fractal;
    std::function<int()> run;
    auto bind = [&](const char* name, const char* help, auto& cmd) {
        auto* sub = app.add_subcommand(name, help);
        cmd.setup(sub);
        sub->callback([&run, &cmd] { run = [&cmd] { return cmd.run(); }; });
    };
    bind("generate", "write a synthetic dataset (franke or sphere)", generate);
    bind("fit", "continuation fit; writes the control net, weights and report", fit);
    bind("diagnose", "s* and spectral radius of the Gauss-Seidel block along r", diagnose);
    bind("restore", "flag low-weight pixels and repaint them from the spline", restore);
    bind("contours", "marching-squares contours of a weight field", contours);
    bind("fractal-dim", "box-counting dimension of a mask or weight set", fractal);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        return run();
    } catch (const io::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const InvalidConfiguration& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const InvalidInput& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitConfig;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitConfig;
    } catch (const StageFailure& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        if (!e.stages().empty()) {
            const auto& last = e.stages().back();
            std::fprintf(stderr, "  last converged stage r=%g mu=%g H=%g\n", last.reduction, last.mu, last.entropy);
        }
        return kExitSolver;
    } catch (const Error& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return kExitSolver;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

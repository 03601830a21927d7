#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "polyct/errors.hpp"
#include "polyct/experiments.hpp"
#include "polyct/io.hpp"

namespace fs = std::filesystem;
using namespace polyct;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

void check_keys(const Json& doc, std::initializer_list<const char*> allowed) {
    if (!doc.is_object()) {
        throw ConfigError("config: expected a JSON object");
    }
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) {
            ok = ok || it.key() == a;
        }
        if (!ok) {
            throw ConfigError("config: unknown field '" + it.key() + "'");
        }
    }
}

std::uint64_t seed_of(const Json& doc) {
    if (!doc.contains("seed")) {
        return 0;
    }
    if (!doc.at("seed").is_number_integer() || doc.at("seed").get<long long>() < 0) {
        throw ConfigError("config.seed: expected a nonnegative integer");
    }
    return static_cast<std::uint64_t>(doc.at("seed").get<long long>());
}

void write_problem_files(const CtProblem& p, const fs::path& out) {
    write_pgm(out / "phantom.pgm", p.truth);
    write_image_csv(out / "phantom.csv", p.truth);
    write_matrix_csv(out / "matrix.csv", *p.A);
    write_measurements_csv(out / "measurements.csv", p.y);
    write_measurements_csv(out / "expected.csv", p.expected);
    write_text_file(out / "constraint.json", constraint_to_json(p.X).dump(2) + "\n");
    if (!p.model->per_ray()) {
        WindowedSpectra s;
        for (std::size_t w = 0; w < p.model->windows(); ++w) {
            s.windows.push_back(p.model->spectrum(w * p.model->rows()));
        }
        write_text_file(out / "spectra.json", spectra_to_json(s).dump(2) + "\n");
    }
}

int cmd_simulate(const Json& doc, const fs::path& dir, const fs::path& out) {
    check_keys(doc, {"problem", "seed"});
    const ProblemSpec spec = problem_spec_from_json(doc.value("problem", Json()), dir);
    const CtProblem p = make_ct_problem(spec, seed_of(doc));
    write_problem_files(p, out);
    return 0;
}

int cmd_reconstruct(const Json& doc, const fs::path& dir, const fs::path& out) {
    check_keys(doc, {"problem", "seed", "solver", "max_iters", "convergence_tol", "averaging", "record_timing",
                     "measurements_file"});
    const ProblemSpec spec = problem_spec_from_json(doc.value("problem", Json()), dir);
    CtProblem p = make_ct_problem(spec, seed_of(doc));
    if (doc.contains("measurements_file")) {
        fs::path f = doc.at("measurements_file").get<std::string>();
        if (f.is_relative()) {
            f = dir / f;
        }
        if (!fs::exists(f)) {
            throw ConfigError("config.measurements_file: '" + f.string() + "' does not exist");
        }
        MeasurementSet y = read_measurements_csv(f);
        if (y.size() != p.model->measurements()) {
            throw ConfigError("config.measurements_file: expected " + std::to_string(p.model->measurements()) +
                              " counts, got " + std::to_string(y.size()));
        }
        p.y = std::move(y);
    }
    if (!doc.contains("solver")) {
        throw ConfigError("config: missing field 'solver'");
    }
    SolverSpec s = solver_spec_from_json(doc.at("solver"), "config.solver");
    if (!s.step_grid.empty() || !s.rho_grid.empty()) {
        throw ConfigError("config.solver: grids are only tuned by the sweep command");
    }
    SolverConfig base;
    if (doc.contains("max_iters")) {
        base.max_iters = doc.at("max_iters").get<int>();
    }
    if (doc.contains("convergence_tol")) {
        base.convergence_tol = doc.at("convergence_tol").get<double>();
    }
    base.averaging = doc.value("averaging", true);
    base.record_timing = doc.value("record_timing", false);
    try {
        solver_config(s, base).validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    const Vec x1(p.truth.values.size(), p.init_value);
    const SolverConfig cfg = solver_config(s, base);
    SolveResult r;
    if (s.name == "exact") {
        r = exact_solve(*p.model, p.y.counts, p.X, cfg, x1, &p.truth.values);
    } else if (s.name == "mse_gd") {
        r = mse_gd_solve(*p.model, p.y.counts, p.X, cfg, x1, &p.truth.values);
    } else if (s.name == "polyak_sgm") {
        r = polyak_sgm_solve(*p.model, p.y.counts, p.X, cfg, x1, l1_loss(*p.model, p.y.counts, p.truth.values),
                             &p.truth.values);
    } else {
        r = admm_poisson_solve(*p.model, p.y.counts, p.X, cfg, x1, &p.truth.values);
    }
    const Image rec{p.truth.side, r.x};
    write_trace_csv(out / "trace.csv", r.trace);
    write_pgm(out / "recon.pgm", rec);
    write_image_csv(out / "recon.csv", rec);
    Json res = {{"solver", s.name},
                {"iterations", r.trace.iterations},
                {"converged", r.trace.converged},
                {"rmse", r.trace.final_rmse},
                {"step", s.name == "admm" ? s.rho : s.step_size}};
    Json rois = Json::array();
    for (const Disc& d : p.rois) {
        rois.push_back({{"truth", d.density}, {"mean", region_mean(rec, d)}});
    }
    res["rois"] = rois;
    write_text_file(out / "result.json", res.dump(2) + "\n");
    return 0;
}

int cmd_sweep(const Json& doc, const fs::path& dir, const fs::path& out) {
    const ExperimentConfig cfg = experiment_config_from_json(doc, dir);
    if (cfg.scenario == "theory_report") {
        const Json j = run_theory_report(cfg);
        write_text_file(out / "theory.json", j.dump(2) + "\n");
        return 0;
    }
    const SweepReport rep = run_experiment(cfg, out);
    for (const auto& [name, ok] : rep.checks) {
        std::printf("%s %s\n", ok ? "PASS" : "FAIL", name.c_str());
    }
    return 0;
}

int cmd_theory(const Json& doc, const fs::path& dir, const fs::path& out) {
    Json copy = doc;
    if (!copy.contains("scenario")) {
        copy["scenario"] = "theory_report";
    }
    const ExperimentConfig cfg = experiment_config_from_json(copy, dir);
    const Json j = run_theory_report(cfg);
    std::cout << j.dump(2) << "\n";
    if (!out.empty()) {
        write_text_file(out / "theory.json", j.dump(2) + "\n");
    }
    return 0;
}

int cmd_phantom(const Json& doc, const fs::path&, const fs::path& out) {
    check_keys(doc, {"phantom", "grid_side", "bins", "background_scale"});
    const std::string kind = doc.value("phantom", std::string("pmma"));
    const std::size_t side = doc.value("grid_side", std::size_t{25});
    if (kind == "pmma") {
        const Image img = make_pmma_phantom(side);
        write_pgm(out / "phantom.pgm", img);
        write_image_csv(out / "phantom.csv", img);
    } else if (kind == "contrast") {
        const ContrastScenario sc =
            make_contrast_scenario(side, doc.value("bins", std::size_t{50}), doc.value("background_scale", 1.0));
        for (const auto& [name, img] : {std::pair{"water", &sc.water}, {"bone", &sc.bone}, {"iodine", &sc.iodine}}) {
            write_pgm(out / (std::string(name) + ".pgm"), *img);
            write_image_csv(out / (std::string(name) + ".csv"), *img);
        }
    } else {
        throw ConfigError("config.phantom: expected \"pmma\" or \"contrast\"");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polychromatic CT simulation and reconstruction"};
    app.require_subcommand(1);
    std::string config;
    std::string out;
    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(const Json&, const fs::path&, const fs::path&);
        bool needs_out;
    };
    const Entry entries[] = {
        {"simulate", "Simulate a phantom, system matrix and measurements", cmd_simulate, true},
        {"reconstruct", "Reconstruct an image with one solver", cmd_reconstruct, true},
        {"sweep", "Run an experiment sweep", cmd_sweep, true},
        {"theory", "Print theoretical quantities as JSON", cmd_theory, false},
        {"phantom", "Write a phantom image", cmd_phantom, true},
    };
    std::vector<CLI::App*> subs;
    for (const Entry& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
        auto* o = sub->add_option("--out", out, "Output directory");
        if (e.needs_out) {
            o->required();
        }
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }
    try {
        const fs::path cfg_path = config;
        const Json doc = read_json_file(cfg_path);
        const fs::path out_dir = out;
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
        }
        for (std::size_t k = 0; k < subs.size(); ++k) {
            if (subs[k]->parsed()) {
                return entries[k].fn(doc, cfg_path.parent_path(), out_dir);
            }
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "solver diverged: %s\n", e.what());
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}

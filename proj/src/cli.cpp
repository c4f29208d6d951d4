/*
* Copyright (C) 2026 The epigam Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*/
#include "epigam/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "epigam/csv.hpp"
#include "epigam/dataset.hpp"
#include "epigam/errors.hpp"
#include "epigam/manifest.hpp"
#include "epigam/synthetic.hpp"

#ifndef EPIGAM_VERSION
#define EPIGAM_VERSION "unknown"
#endif

namespace epigam
{

namespace
{

namespace fs = std::filesystem;

std::string out_path(const std::string& dir, const char* name)
{
    return (fs::path(dir) / name).string();
}

void write_json(const nlohmann::json& j, const std::string& path)
{
    std::ofstream f(path, std::ios::binary);
    f << j.dump(2) << '\n';
    if (!f) {
        throw DataError(fmt::format("cannot write '{}'", path));
    }
}

void finish(const RunConfig& config, const std::vector<std::string>& inputs, std::vector<std::string> outputs,
            const std::string& dir)
{
    write_manifest(build_manifest(config, inputs, outputs), out_path(dir, "run_manifest.json"));
    spdlog::info("wrote {} file(s) and run_manifest.json to {}", outputs.size(), dir);
}

void run_infection_fit(RunConfig& config, const std::string& out)
{
    const auto bundle = validate_and_load(config.input_dir, Schema::infection);
    const auto fits   = fit_infection_model(*bundle.infection_panel, *bundle.population, config.delta);
    std::vector<std::string> outputs = {out_path(out, "infection_coefficients.csv"),
                                        out_path(out, "week_intercepts.csv"), out_path(out, "infection_fits.json")};
    write_infection_coefficients(fits, outputs[0]);
    write_week_intercepts(fits, outputs[1]);
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : fits) {
        j[f.age_group] = to_json(f.fit);
    }
    write_json(j, outputs[2]);
    finish(config, bundle.paths, outputs, out);
}

void run_cdr_study_cmd(RunConfig& config, const std::string& out, CdrStudyConfig study, double gamma)
{
    study.seed       = *config.seed;
    study.replicates = static_cast<std::size_t>(config.replicates);
    const auto independent = run_cdr_study(study);
    study.elasticity       = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(study.ages));
    study.elasticity(0)    = gamma;
    const auto adversarial = run_cdr_study(study);

    std::vector<std::string> outputs = {out_path(out, "cdr_study.csv"), out_path(out, "cdr_summary.json")};
    {
        CsvWriter csv(outputs[0], {"mode", "replicate", "fraction_within", "max_abs_standardized", "any_outside"});
        for (const auto* res : {&independent, &adversarial}) {
            const std::string mode = res == &independent ? "independent" : "adversarial";
            for (const auto& r : res->replicates) {
                csv.row({mode, std::to_string(r.replicate), format_number(r.fraction_within),
                         format_number(r.max_abs_standardized), r.any_outside ? "true" : "false"});
            }
        }
    }
    const auto summary = [](const CdrStudyResult& r) {
        return nlohmann::json{{"pooled_fraction_within", r.pooled_fraction_within},
                              {"fraction_with_outside", r.fraction_with_outside}};
    };
    write_json({{"independent", summary(independent)},
                {"adversarial", summary(adversarial)},
                {"districts", study.districts},
                {"weeks", study.weeks},
                {"ages", study.ages},
                {"mean_cdr", study.mean_cdr},
                {"concentration", study.concentration},
                {"adversarial_elasticity", gamma}},
               outputs[1]);
    finish(config, {}, outputs, out);
}

void run_nowcast_fit(RunConfig& config, const std::string& out, DelayModelOptions options)
{
    const auto bundle = validate_and_load(config.input_dir, Schema::nowcast);
    ImputationReport imputation;
    const auto list = impute_admission_dates(*bundle.line_list, &imputation);
    spdlog::info("{} admission dates imputed, {} records dropped", imputation.imputed, imputation.dropped);
    const auto tri = build_triangle(list, parse_date(config.as_of), config.d_max, AgeMap::default_map());
    const auto fit = fit_delay_model(tri, options);
    auto result    = nowcast_point(tri, fit);
    bootstrap_ci(result, tri, fit, config.bootstrap, *config.seed);
    std::vector<std::string> outputs = {out_path(out, "nowcast.csv"), out_path(out, "delay_model.json")};
    write_nowcast_csv(result, outputs[0]);
    write_json(delay_model_json(fit), outputs[1]);
    finish(config, bundle.paths, outputs, out);
}

void run_hosp_fit(RunConfig& config, const std::string& out, HospConfig hosp)
{
    const auto bundle = validate_and_load(config.input_dir, Schema::hosp);
    HospPanel panel   = *bundle.hosp_panel;
    if (!config.as_of.empty()) {
        panel.as_of = parse_date(config.as_of);
    }
    DelayCdfTable cdf;
    std::vector<std::string> inputs = bundle.paths;
    if (hosp.delay_offset) {
        const auto it = config.extra_inputs.find("nowcast_model");
        if (it == config.extra_inputs.end()) {
            throw ConfigError("hosp fit needs --nowcast-model (or --no-delay-offset)");
        }
        std::ifstream f(it->second);
        if (!f) {
            throw DataError(fmt::format("cannot open '{}'", it->second));
        }
        nlohmann::json j;
        try {
            f >> j;
        }
        catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("'{}' is not valid JSON: {}", it->second, e.what()));
        }
        cdf = DelayCdfTable::from_json(j);
        if (cdf.as_of != panel.as_of) {
            throw ConfigError(fmt::format("delay model is as of {}, the panel as of {}", format_date(cdf.as_of),
                                          format_date(panel.as_of)));
        }
        inputs.push_back(it->second);
    }
    const auto data = build_hosp_design(panel, bundle.cell_population, bundle.coords, cdf, hosp);
    const auto fit  = fit_hosp_model(data);
    emit_effect_grids(fit, data, bundle.coords, out);
    std::vector<std::string> outputs;
    for (const char* name : {"age_gender_effects.csv", "weekday_effects.csv", "time_smooth.csv",
                             "spatial_surface.csv", "district_random_effects.csv"}) {
        outputs.push_back(out_path(out, name));
    }
    outputs.push_back(out_path(out, "hosp_fit.json"));
    write_json(to_json(fit), outputs.back());
    finish(config, inputs, outputs, out);
}

void run_icu_fit(RunConfig& config, const std::string& out, const IcuConfig& icu)
{
    const auto bundle = validate_and_load(config.input_dir, Schema::icu);
    const auto& panel = *bundle.icu_panel;
    panel.validate();
    const auto data = build_icu_design(panel, 1, panel.num_weeks() - 1, icu);
    const auto fit  = fit_icu_model(data);
    if (!fit.converged) {
        spdlog::warn("ICU model did not converge: {}", fit.message);
    }
    std::vector<std::string> outputs = {out_path(out, "icu_coefficients.csv"), out_path(out, "icu_spatial_surfaces.csv"),
                                        out_path(out, "icu_fit.json")};
    write_icu_coefficients(fit, data, outputs[0]);
    write_icu_surfaces(fit, data, panel, outputs[1]);
    write_json(to_json(fit), outputs[2]);
    finish(config, bundle.paths, outputs, out);
}

void run_icu_forecast(RunConfig& config, const std::string& out, IcuConfig icu)
{
    const auto bundle = validate_and_load(config.input_dir, Schema::icu);
    icu.window        = config.window;
    const auto records = rolling_forecast(*bundle.icu_panel, icu);
    const auto rows    = score_table(records, config.n_perm, *config.seed);
    std::vector<std::string> outputs = {out_path(out, "forecast_scores.csv"), out_path(out, "score_table.csv")};
    write_forecast_scores(records, *bundle.icu_panel, outputs[0]);
    write_score_table(rows, outputs[1]);
    finish(config, bundle.paths, outputs, out);
}

void run_simulate(RunConfig& config, const std::string& out, const std::string& params_path)
{
    std::vector<std::string> inputs;
    if (!params_path.empty()) {
        std::ifstream f(params_path);
        if (!f) {
            throw DataError(fmt::format("cannot open '{}'", params_path));
        }
        try {
            f >> config.params;
        }
        catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("'{}' is not valid JSON: {}", params_path, e.what()));
        }
        // a pipe cannot be hashed after reading; the parsed params are in the config either way
        if (std::filesystem::is_regular_file(params_path)) {
            inputs.push_back(params_path);
        }
    }
    const auto result = generate_synthetic(parse_schema(config.scenario), config.params, *config.seed, out);
    finish(config, inputs, result.files, out);
}

int run_validate(RunConfig& config, const std::string& schema, const std::string& out)
{
    nlohmann::json report = {{"schema", schema}, {"input_dir", config.input_dir}};
    int code              = 0;
    try {
        const auto bundle     = validate_and_load(config.input_dir, parse_schema(schema));
        report["valid"]       = true;
        report["issues"]      = nlohmann::json::array();
        report["zero_filled"] = bundle.zero_filled;
        std::cout << fmt::format("{}: valid ({} zero-filled cells)\n", config.input_dir, bundle.zero_filled);
    }
    catch (const ValidationError& e) {
        report["valid"]  = false;
        report["issues"] = e.report().to_json();
        std::cout << e.report().summary(1000) << '\n';
        code = 1;
    }
    if (!out.empty()) {
        fs::create_directories(out);
        write_json(report, out_path(out, "validation.json"));
    }
    return code;
}

std::string error_kind(const std::exception& e)
{
    if (dynamic_cast<const ValidationError*>(&e) != nullptr) {
        return "validation";
    }
    if (dynamic_cast<const DataError*>(&e) != nullptr) {
        return "data";
    }
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
        return "config";
    }
    if (dynamic_cast<const NumericError*>(&e) != nullptr) {
        return "numeric";
    }
    if (dynamic_cast<const DomainError*>(&e) != nullptr) {
        return "domain";
    }
    return "internal";
}

void setup_logging(bool quiet)
{
    static auto logger = [] {
        auto l = spdlog::stderr_color_mt("epigam");
        l->set_pattern("[%l] %v");
        return l;
    }();
    spdlog::set_default_logger(logger);
    spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
}

int dispatch(const std::function<void(CLI::App&)>& parse)
{
    CLI::App app{"Penalized regression pipelines for surveillance data: infection dynamics, nowcasting, "
                 "hospitalisations and ICU occupancy.",
                 "epigam"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", EPIGAM_VERSION);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    RunConfig config;
    std::string out;
    std::string seed_text;
    const auto add_out = [&](CLI::App* sub) {
        sub->add_option("--out", out, "Output directory")->required();
    };
    const auto add_in = [&](CLI::App* sub) {
        sub->add_option("--in", config.input_dir, "Input bundle directory")->required();
    };
    const auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", seed_text, "Random seed (unsigned 64-bit)")->required();
    };

    // infection
    auto* infection = app.add_subcommand("infection", "Autoregressive negative-binomial infection model");
    infection->require_subcommand(1);
    auto* inf_fit = infection->add_subcommand("fit", "Fit one model per age group");
    add_in(inf_fit);
    add_out(inf_fit);
    inf_fit->add_option("--delta", config.delta, "Offset inside log(Y + delta)")->capture_default_str();

    CdrStudyConfig study;
    double gamma = 1.0;
    auto* cdr    = infection->add_subcommand("cdr-study", "Simulation study of under-reporting invariance");
    add_out(cdr);
    add_seed(cdr);
    cdr->add_option("--replicates", config.replicates, "Replicates per mode")->capture_default_str();
    cdr->add_option("--districts", study.districts)->capture_default_str();
    cdr->add_option("--weeks", study.weeks)->capture_default_str();
    cdr->add_option("--ages", study.ages)->capture_default_str();
    cdr->add_option("--mean-cdr", study.mean_cdr)->capture_default_str();
    cdr->add_option("--concentration", study.concentration, "Beta concentration of the detection ratio")
        ->capture_default_str();
    cdr->add_option("--adversarial-gamma", gamma, "Outcome elasticity of the first age group's CDR")
        ->capture_default_str();

    // nowcast
    DelayModelOptions delay;
    auto* nowcast = app.add_subcommand("nowcast", "Reporting-delay model and nowcast");
    nowcast->require_subcommand(1);
    auto* nc_fit = nowcast->add_subcommand("fit", "Fit the delay model and nowcast recent days");
    add_in(nc_fit);
    add_out(nc_fit);
    add_seed(nc_fit);
    nc_fit->add_option("--as-of", config.as_of, "As-of date T (YYYY-MM-DD)")->required();
    nc_fit->add_option("--dmax", config.d_max, "Maximum delay in days")->capture_default_str();
    nc_fit->add_option("--bootstrap", config.bootstrap, "Bootstrap replicates")->capture_default_str();
    nc_fit->add_option("--knot-spacing", delay.knot_spacing, "Days between trend knots")->capture_default_str();
    nc_fit->add_option("--delay-basis", delay.num_basis, "Basis dimension of the delay smooth")->capture_default_str();

    // hosp
    HospConfig hosp;
    std::string nowcast_model;
    bool no_offset = false;
    auto* hosp_cmd = app.add_subcommand("hosp", "Hospitalisation incidence model");
    hosp_cmd->require_subcommand(1);
    auto* hosp_fit = hosp_cmd->add_subcommand("fit", "Fit the delay-corrected incidence model");
    add_in(hosp_fit);
    add_out(hosp_fit);
    hosp_fit->add_option("--as-of", config.as_of, "As-of date (defaults to the day after the last panel date)");
    hosp_fit->add_option("--nowcast-model", nowcast_model, "delay_model.json written by `nowcast fit`");
    hosp_fit->add_flag("--no-delay-offset", no_offset, "Use log population only as the offset");
    hosp_fit->add_option("--time-basis", hosp.time_basis)->capture_default_str();
    hosp_fit->add_option("--spatial-rank", hosp.spatial_rank)->capture_default_str();

    // icu
    IcuConfig icu;
    auto* icu_cmd = app.add_subcommand("icu", "Multinomial ICU occupancy model");
    icu_cmd->require_subcommand(1);
    auto* icu_fit = icu_cmd->add_subcommand("fit", "Fit the full model on all weeks");
    add_in(icu_fit);
    add_out(icu_fit);
    icu_fit->add_option("--delta", icu.delta)->capture_default_str();
    icu_fit->add_option("--spatial-rank", icu.spatial_rank)->capture_default_str();
    auto* icu_fc = icu_cmd->add_subcommand("forecast", "Rolling one-week-ahead forecasts and permutation tests");
    add_in(icu_fc);
    add_out(icu_fc);
    add_seed(icu_fc);
    icu_fc->add_option("--window", config.window, "Training weeks")->capture_default_str();
    icu_fc->add_option("--n-perm", config.n_perm, "Random sign flips per test")->capture_default_str();
    icu_fc->add_option("--delta", icu.delta)->capture_default_str();
    icu_fc->add_option("--spatial-rank", icu.spatial_rank)->capture_default_str();

    // simulate
    std::string params_path;
    auto* simulate = app.add_subcommand("simulate", "Write a synthetic bundle with truth.json");
    add_out(simulate);
    add_seed(simulate);
    simulate->add_option("--scenario", config.scenario, "infection, nowcast or icu")
        ->required()
        ->check(CLI::IsMember({"infection", "nowcast", "icu"}));
    simulate->add_option("--params", params_path, "JSON file with parameter overrides");

    // validate
    std::string schema;
    std::string report_dir;
    auto* validate = app.add_subcommand("validate", "Check an input bundle against a schema");
    add_in(validate);
    validate->add_option("--schema", schema, "infection, nowcast, hosp or icu")
        ->required()
        ->check(CLI::IsMember({"infection", "nowcast", "hosp", "icu"}));
    validate->add_option("--out", report_dir, "Write validation.json here");

    try {
        parse(app);
    }
    catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    setup_logging(quiet);

    try {
        if (!seed_text.empty()) {
            std::size_t pos = 0;
            unsigned long long v = 0;
            try {
                v = std::stoull(seed_text, &pos);
            }
            catch (const std::exception&) {
                pos = 0;
            }
            if (pos != seed_text.size() || seed_text.front() == '-') {
                std::cerr << fmt::format("--seed: '{}' is not an unsigned 64-bit integer\n", seed_text);
                return 2;
            }
            config.seed = v;
        }
        if (!out.empty()) {
            fs::create_directories(out);
        }
        if (inf_fit->parsed()) {
            config.command = "infection fit";
            run_infection_fit(config, out);
        }
        else if (cdr->parsed()) {
            config.command = "infection cdr-study";
            run_cdr_study_cmd(config, out, study, gamma);
        }
        else if (nc_fit->parsed()) {
            config.command = "nowcast fit";
            config.basis   = {{"s(d)", delay.num_basis}, {"knot_spacing", delay.knot_spacing}};
            run_nowcast_fit(config, out, delay);
        }
        else if (hosp_fit->parsed()) {
            config.command    = "hosp fit";
            hosp.delay_offset = !no_offset;
            if (!nowcast_model.empty()) {
                config.extra_inputs["nowcast_model"] = nowcast_model;
            }
            config.basis = {{"s(t)", hosp.time_basis}, {"s(lon,lat)", hosp.spatial_rank}};
            run_hosp_fit(config, out, hosp);
        }
        else if (icu_fit->parsed()) {
            config.command = "icu fit";
            config.delta   = icu.delta;
            config.basis   = {{"s(lon,lat)", icu.spatial_rank}};
            run_icu_fit(config, out, icu);
        }
        else if (icu_fc->parsed()) {
            config.command = "icu forecast";
            config.delta   = icu.delta;
            config.basis   = {{"s(lon,lat)", icu.spatial_rank}};
            run_icu_forecast(config, out, icu);
        }
        else if (simulate->parsed()) {
            config.command = "simulate";
            run_simulate(config, out, params_path);
        }
        else if (validate->parsed()) {
            config.command = "validate";
            return run_validate(config, schema, report_dir);
        }
    }
    catch (const std::exception& e) {
        const nlohmann::json err = {{"error", error_kind(e)}, {"message", e.what()}};
        std::cerr << err.dump() << '\n';
        return 1;
    }
    return 0;
}

} // namespace

int cli_dispatch(int argc, const char* const* argv)
{
    return dispatch([&](CLI::App& app) {
        app.parse(argc, argv);
    });
}

int cli_dispatch(const std::vector<std::string>& args)
{
    return dispatch([&](CLI::App& app) {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    });
}

} // namespace epigam

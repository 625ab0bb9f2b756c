// Command-line front end: fit / apply / eval / sweep / simulate / synth.
// Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.

#include "CLI11.hpp"
#include "json.hpp"

#include "fbe/bank.hpp"
#include "fbe/enhance.hpp"
#include "fbe/metrics.hpp"
#include "fbe/scores.hpp"
#include "fbe/synth.hpp"
#include "fbe/theory.hpp"
#include "fbe/version.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using json = nlohmann::ordered_json;

namespace {

std::int64_t ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(path + ": cannot open config file");
    json cfg;
    try {
        in >> cfg;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    if (!cfg.is_object()) throw std::invalid_argument(path + ": config must be a JSON object");
    return cfg;
}

// Flags beat config-file values beat defaults.
template <typename T>
void cfg_override(const CLI::Option* opt, const json& cfg, const std::string& key, T& var) {
    if (opt != nullptr && opt->count() > 0) return;
    if (cfg.contains(key)) var = cfg.at(key).get<T>();
}

// Once flags have been validated, remaining invalid-argument throws come from
// mismatched data (wrong dimensions, bad payloads) and belong to exit code 1.
template <typename Fn>
void run_data_stage(Fn&& fn) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(e.what());
    }
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << body;
    if (!out) throw std::runtime_error(path + ": write failed");
}

json input_entry(const std::string& path) {
    return json{{"path", path}, {"fnv1a64", fbe::file_content_hash(path)}};
}

fbe::BankFormat parse_format(const std::string& name) {
    if (name == "binary") return fbe::BankFormat::binary;
    if (name == "csv") return fbe::BankFormat::csv;
    throw std::invalid_argument("unknown bank format \"" + name + "\"");
}

std::vector<double> parse_number_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string piece = text.substr(start, comma - start);
        if (!piece.empty()) {
            try {
                std::size_t used = 0;
                const double v = std::stod(piece, &used);
                if (used != piece.size()) throw std::invalid_argument(piece);
                out.push_back(v);
            } catch (const std::exception&) {
                throw std::invalid_argument(std::string(what) + ": cannot parse \"" + piece +
                                            "\" as a number");
            }
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument(std::string(what) + ": empty list");
    return out;
}

void validate_score_flags(const std::string& score, int k, const std::string& head_path) {
    const fbe::ScoreKind kind = fbe::score_kind_from_string(score);
    if ((kind == fbe::ScoreKind::knn || kind == fbe::ScoreKind::nnguide) && k < 1)
        throw std::invalid_argument("--k is required (>= 1) for knn and nnguide scores");
    if (fbe::needs_head(kind) && head_path.empty())
        throw std::invalid_argument("--head is required for score \"" + score + "\"");
}

json spec_json(const fbe::ScoreSpec& spec) {
    json j{{"kind", fbe::to_string(spec.kind)}};
    if (spec.kind == fbe::ScoreKind::knn || spec.kind == fbe::ScoreKind::nnguide)
        j["k"] = spec.k;
    if (spec.kind == fbe::ScoreKind::energy) j["temperature"] = spec.temperature;
    if (spec.react_percentile)
        j["react_percentile"] = *spec.react_percentile;
    else
        j["react_percentile"] = nullptr;
    return j;
}

json report_json(const fbe::ScoreSpec& spec, const fbe::EvalReport& r) {
    return json{{"score", spec_json(spec)}, {"auroc", r.auroc},   {"fpr95", r.fpr95},
                {"n_id", r.n_id},           {"n_ood", r.n_ood}, {"wall_ms", r.wall_ms}};
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
    std::string config;
    std::string bank_path;
    std::string format = "binary";
    bool labels = false;
    double lambda = 100.0;
    std::string out_path;
};

void run_fit(const FitArgs& a) {
    const fbe::FeatureBank bank = fbe::load_bank(a.bank_path, parse_format(a.format), a.labels);
    const auto t0 = std::chrono::steady_clock::now();
    const fbe::DeviationBoundaries bounds = fbe::fit_boundaries(bank, a.lambda);
    const std::int64_t fit_ms = ms_since(t0);
    fbe::save_boundaries(bounds, a.out_path);

    double lo = bounds.radius[0], hi = bounds.radius[0], sum = 0.0;
    for (float r : bounds.radius) {
        lo = std::min<double>(lo, r);
        hi = std::max<double>(hi, r);
        sum += r;
    }
    std::cout << "fitted boundaries: lambda=" << a.lambda << " rows=" << bank.rows
              << " dim=" << bank.dim << "\n"
              << "radius min=" << format_double(lo)
              << " mean=" << format_double(sum / double(bank.dim))
              << " max=" << format_double(hi) << "\n"
              << "fit_wall_ms=" << fit_ms << "\n"
              << "wrote " << a.out_path << "\n";
}

// ---------------------------------------------------------------------------
// apply
// ---------------------------------------------------------------------------

struct ApplyArgs {
    std::string config;
    std::string bank_path;
    std::string format = "binary";
    bool labels = false;
    std::string boundaries_path;
    std::string out_path;
};

void run_apply(const ApplyArgs& a) {
    const fbe::FeatureBank bank = fbe::load_bank(a.bank_path, parse_format(a.format), a.labels);
    const fbe::DeviationBoundaries bounds = fbe::load_boundaries(a.boundaries_path);
    const auto t0 = std::chrono::steady_clock::now();
    const fbe::FeatureBank clamped = fbe::clamp_bank(bank, bounds);
    const std::int64_t apply_ms = ms_since(t0);
    fbe::save_bank(clamped, a.out_path);

    std::vector<std::size_t> per_dim(bank.dim, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < bank.rows; ++i) {
        for (std::size_t j = 0; j < bank.dim; ++j) {
            if (bank.at(i, j) != clamped.at(i, j)) {
                ++per_dim[j];
                ++total;
            }
        }
    }
    std::vector<double> fractions(bank.dim);
    for (std::size_t j = 0; j < bank.dim; ++j)
        fractions[j] = double(per_dim[j]) / double(bank.rows);
    std::sort(fractions.begin(), fractions.end());
    std::cout << "clamped entries: " << total << " of " << bank.rows * bank.dim << " ("
              << format_double(double(total) / double(bank.rows * bank.dim)) << ")\n"
              << "per-dimension clamped fraction: min=" << format_double(fractions.front())
              << " median=" << format_double(fractions[bank.dim / 2])
              << " max=" << format_double(fractions.back()) << "\n"
              << "apply_wall_ms=" << apply_ms << "\n"
              << "wrote " << a.out_path << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string config;
    std::string bank_path;
    std::string id_path;
    std::string ood_path;
    std::string head_path;
    std::string format = "binary";
    bool labels = false;
    std::string score = "knn";
    int k = 0;
    double temperature = 1.0;
    double react_percentile = 0.0;  // 0 = off
    std::string react_order = "bank-and-queries";
    std::string boundaries_path;
    double lambda = -1.0;  // < 0 = no in-process fit
    std::string out_path;
    std::string scores_out;
};

struct ScoredEval {
    fbe::EvalReport report;
    fbe::ScoreBatch id_scores;
    fbe::ScoreBatch ood_scores;
};

ScoredEval run_scored_eval(const fbe::ScoreSpec& spec, const fbe::FeatureBank& bank,
                           const fbe::LinearHead* head, const fbe::FeatureBank& id_q,
                           const fbe::FeatureBank& ood_q) {
    const auto t0 = std::chrono::steady_clock::now();
    ScoredEval out;
    out.id_scores = fbe::score_queries(spec, bank, head, id_q);
    out.ood_scores = fbe::score_queries(spec, bank, head, ood_q);
    const fbe::EvalSet sets{out.id_scores.scores, out.ood_scores.scores};
    out.report.auroc = fbe::auroc(sets);
    out.report.fpr95 = fbe::fpr_at_tpr(sets, 0.95);
    out.report.n_id = sets.id_scores.size();
    out.report.n_ood = sets.ood_scores.size();
    out.report.wall_ms = ms_since(t0);
    return out;
}

void run_eval(const EvalArgs& a) {
    fbe::ScoreSpec spec;
    spec.kind = fbe::score_kind_from_string(a.score);
    spec.k = a.k;
    spec.temperature = a.temperature;

    json inputs;
    inputs["bank"] = input_entry(a.bank_path);
    inputs["id"] = input_entry(a.id_path);
    inputs["ood"] = input_entry(a.ood_path);

    const auto t_load = std::chrono::steady_clock::now();
    fbe::FeatureBank bank = fbe::load_bank(a.bank_path, parse_format(a.format), a.labels);
    fbe::FeatureBank id_q = fbe::load_bank(a.id_path, parse_format(a.format));
    fbe::FeatureBank ood_q = fbe::load_bank(a.ood_path, parse_format(a.format));
    std::optional<fbe::LinearHead> head;
    if (!a.head_path.empty()) {
        head = fbe::load_head(a.head_path);
        inputs["head"] = input_entry(a.head_path);
    }
    const std::int64_t load_ms = ms_since(t_load);

    // ReAct composition. "bank-and-queries" clips everything against the raw
    // bank before any boundary fitting; "queries-only" defers to the score
    // function, which then derives its threshold from the scoring bank.
    std::int64_t react_ms = 0;
    if (a.react_percentile > 0.0) {
        if (a.react_order == "bank-and-queries") {
            const auto t0 = std::chrono::steady_clock::now();
            const double p = a.react_percentile;
            fbe::FeatureBank clipped_bank = fbe::react_clip(bank, bank, p);
            id_q = fbe::react_clip(id_q, bank, p);
            ood_q = fbe::react_clip(ood_q, bank, p);
            bank = std::move(clipped_bank);
            react_ms = ms_since(t0);
        } else if (a.react_order == "queries-only") {
            spec.react_percentile = a.react_percentile;
        } else {
            throw std::invalid_argument("--react-order must be bank-and-queries or queries-only");
        }
    }

    json out;
    out["tool_version"] = fbe::kToolVersion;
    out["command"] = "eval";
    json cfg_echo{{"score", spec_json(spec)},
                  {"format", a.format},
                  {"react_order", a.react_order},
                  {"load_wall_ms", load_ms},
                  {"react_wall_ms", react_ms}};

    const ScoredEval base = run_scored_eval(spec, bank, head ? &*head : nullptr, id_q, ood_q);
    out["base"] = report_json(spec, base.report);

    std::optional<ScoredEval> enhanced;
    if (!a.boundaries_path.empty() || a.lambda >= 0.0) {
        fbe::DeviationBoundaries bounds;
        std::int64_t fit_ms = 0;
        if (!a.boundaries_path.empty()) {
            bounds = fbe::load_boundaries(a.boundaries_path);
            inputs["boundaries"] = input_entry(a.boundaries_path);
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            bounds = fbe::fit_boundaries(bank, a.lambda);
            fit_ms = ms_since(t0);
        }
        const auto t1 = std::chrono::steady_clock::now();
        const fbe::FeatureBank clamped = fbe::clamp_bank(bank, bounds);
        const std::int64_t apply_ms = ms_since(t1);
        enhanced = run_scored_eval(spec, clamped, head ? &*head : nullptr, id_q, ood_q);
        json fbe_row = report_json(spec, enhanced->report);
        fbe_row["lambda"] = bounds.lambda;
        fbe_row["fit_wall_ms"] = fit_ms;
        fbe_row["apply_wall_ms"] = apply_ms;
        out["fbe"] = std::move(fbe_row);
    }

    out["config"] = std::move(cfg_echo);
    out["inputs"] = std::move(inputs);

    if (!a.scores_out.empty()) {
        std::filesystem::create_directories(a.scores_out);
        const std::filesystem::path dir(a.scores_out);
        write_text_file((dir / "id_scores.csv").string(), fbe::score_csv(base.id_scores));
        write_text_file((dir / "ood_scores.csv").string(), fbe::score_csv(base.ood_scores));
        if (enhanced) {
            write_text_file((dir / "fbe_id_scores.csv").string(),
                            fbe::score_csv(enhanced->id_scores));
            write_text_file((dir / "fbe_ood_scores.csv").string(),
                            fbe::score_csv(enhanced->ood_scores));
        }
    }

    const std::string body = out.dump(2) + "\n";
    if (a.out_path.empty())
        std::cout << body;
    else {
        write_text_file(a.out_path, body);
        std::cout << "wrote " << a.out_path << "\n";
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string config;
    std::string bank_path;
    std::string id_path;
    std::string ood_path;
    std::string head_path;
    std::string format = "binary";
    bool labels = false;
    std::string score = "knn";
    int k = 0;
    double temperature = 1.0;
    std::string lambdas;
    std::string out_path;
};

void run_sweep(const SweepArgs& a) {
    fbe::ScoreSpec spec;
    spec.kind = fbe::score_kind_from_string(a.score);
    spec.k = a.k;
    spec.temperature = a.temperature;

    const std::vector<double> lambdas = parse_number_list(a.lambdas, "--lambdas");
    std::vector<double> unique;
    for (double l : lambdas) {
        if (std::find(unique.begin(), unique.end(), l) != unique.end()) {
            std::cerr << "warning: duplicate lambda " << format_double(l) << " ignored\n";
            continue;
        }
        unique.push_back(l);
    }

    const fbe::FeatureBank bank = fbe::load_bank(a.bank_path, parse_format(a.format), a.labels);
    const fbe::FeatureBank id_q = fbe::load_bank(a.id_path, parse_format(a.format));
    const fbe::FeatureBank ood_q = fbe::load_bank(a.ood_path, parse_format(a.format));
    std::optional<fbe::LinearHead> head;
    if (!a.head_path.empty()) head = fbe::load_head(a.head_path);

    std::string csv = "lambda,auroc,fpr95\n";
    for (double l : unique) {
        const fbe::FeatureBank clamped = fbe::enhance(bank, l).first;
        const fbe::EvalReport r =
            fbe::evaluate(spec, clamped, head ? &*head : nullptr, id_q, ood_q);
        csv += format_double(l) + "," + format_double(r.auroc) + "," + format_double(r.fpr95) +
               "\n";
        std::cout << "lambda=" << format_double(l) << " auroc=" << format_double(r.auroc)
                  << " fpr95=" << format_double(r.fpr95) << "\n";
    }
    if (!a.out_path.empty()) {
        write_text_file(a.out_path, csv);
        std::cout << "wrote " << a.out_path << "\n";
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::size_t trials = 100000;
    std::uint64_t seed = 0;
    std::size_t dim = 64;
    double sigma_in = 1.0;
    double clamp = 1.96;
    std::string sigma_out = "1.25,1.5,1.75,2,2.25,2.5,2.75,3";
    std::string epsilon = "-0.8,-0.7,-0.6,-0.5,-0.4,-0.3,-0.2,-0.1";
    std::string out_path;
};

void run_simulate(const SimulateArgs& a) {
    if (a.trials < 1000)
        std::cerr << "warning: trials=" << a.trials
                  << " is low; the stderr column may swamp delta\n";
    fbe::theory::SimConfig cfg;
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.dim = a.dim;
    cfg.sigma_in = a.sigma_in;
    cfg.clamp = a.clamp;
    for (double e : parse_number_list(a.epsilon, "--epsilon"))
        for (double s : parse_number_list(a.sigma_out, "--sigma-out"))
            cfg.grid.push_back({s, e});
    const auto rows = fbe::theory::sweep_surface(cfg);
    const std::string csv = fbe::theory::surface_csv(rows);
    if (a.out_path.empty())
        std::cout << csv;
    else {
        write_text_file(a.out_path, csv);
        std::cout << "wrote " << a.out_path << " (" << rows.size() << " grid points)\n";
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string config;
    int classes = 8;
    int dim = 6;
    int per_class = 250;
    double class_spread = 1.0;
    double near_shift = 3.0;
    double far_shift = 12.0;
    double heavy_tail_frac = 0.05;
    int queries_per_class = 50;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

void run_synth(const SynthArgs& a) {
    fbe::synth::SynthConfig cfg;
    cfg.classes = a.classes;
    cfg.dim = a.dim;
    cfg.per_class = a.per_class;
    cfg.class_spread = a.class_spread;
    cfg.near_shift = a.near_shift;
    cfg.far_shift = a.far_shift;
    cfg.heavy_tail_frac = a.heavy_tail_frac;
    cfg.queries_per_class = a.queries_per_class;
    cfg.seed = a.seed;

    const fbe::synth::SynthDataset data = fbe::synth::generate(cfg);
    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    const std::string train = (dir / "train.fbnk").string();
    const std::string id_test = (dir / "id_test.fbnk").string();
    const std::string near = (dir / "near_ood.fbnk").string();
    const std::string far = (dir / "far_ood.fbnk").string();
    const std::string head = (dir / "head.fhed").string();
    fbe::save_bank(data.train, train);
    fbe::save_bank(data.id_test, id_test);
    fbe::save_bank(data.near_ood, near);
    fbe::save_bank(data.far_ood, far);
    fbe::save_head(data.head, head);

    json manifest;
    manifest["tool_version"] = fbe::kToolVersion;
    manifest["command"] = "synth";
    manifest["config"] = json{{"classes", cfg.classes},
                              {"dim", cfg.dim},
                              {"per_class", cfg.per_class},
                              {"class_spread", cfg.class_spread},
                              {"near_shift", cfg.near_shift},
                              {"far_shift", cfg.far_shift},
                              {"heavy_tail_frac", cfg.heavy_tail_frac},
                              {"queries_per_class", cfg.queries_per_class},
                              {"seed", cfg.seed}};
    // Hashes are keyed by file name so the manifest bytes do not depend on
    // where the benchmark directory lives.
    auto manifest_entry = [](const std::string& path, const char* name) {
        return json{{"file", name}, {"fnv1a64", fbe::file_content_hash(path)}};
    };
    manifest["files"] = json{{"train", manifest_entry(train, "train.fbnk")},
                             {"id_test", manifest_entry(id_test, "id_test.fbnk")},
                             {"near_ood", manifest_entry(near, "near_ood.fbnk")},
                             {"far_ood", manifest_entry(far, "far_ood.fbnk")},
                             {"head", manifest_entry(head, "head.fhed")}};
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Percentile clamping of feature banks for distance-based "
                 "out-of-distribution detection"};
    app.set_version_flag("--version", std::string(fbe::kToolVersion));
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit per-dimension deviation boundaries");
    fit_cmd->add_option("--config", fit.config, "JSON config file");
    auto* fit_bank = fit_cmd->add_option("--bank", fit.bank_path, "Training bank path");
    auto* fit_fmt = fit_cmd->add_option("--format", fit.format, "Bank format: binary|csv")
                        ->check(CLI::IsMember({"binary", "csv"}));
    auto* fit_labels = fit_cmd->add_flag("--labels", fit.labels, "CSV has a final label column");
    auto* fit_lambda = fit_cmd->add_option("--lambda", fit.lambda, "Retention percentile")
                           ->check(CLI::Range(0.0, 100.0));
    auto* fit_out = fit_cmd->add_option("--out", fit.out_path, "Boundaries output path");
    fit_cmd->callback([&] {
        const json cfg = load_config_file(fit.config);
        cfg_override(fit_bank, cfg, "bank", fit.bank_path);
        cfg_override(fit_fmt, cfg, "format", fit.format);
        cfg_override(fit_labels, cfg, "labels", fit.labels);
        cfg_override(fit_lambda, cfg, "lambda", fit.lambda);
        cfg_override(fit_out, cfg, "out", fit.out_path);
        if (fit.bank_path.empty() || fit.out_path.empty())
            throw std::invalid_argument("fit requires --bank and --out");
        if (!(fit.lambda >= 0.0 && fit.lambda <= 100.0))
            throw std::invalid_argument("--lambda must be in [0, 100]");
        run_data_stage([&] { run_fit(fit); });
    });

    ApplyArgs apply;
    auto* apply_cmd = app.add_subcommand("apply", "Clamp a bank to fitted boundaries");
    apply_cmd->add_option("--config", apply.config, "JSON config file");
    auto* apply_bank = apply_cmd->add_option("--bank", apply.bank_path, "Bank path");
    auto* apply_fmt = apply_cmd->add_option("--format", apply.format, "Bank format: binary|csv")
                          ->check(CLI::IsMember({"binary", "csv"}));
    auto* apply_labels =
        apply_cmd->add_flag("--labels", apply.labels, "CSV has a final label column");
    auto* apply_bounds =
        apply_cmd->add_option("--boundaries", apply.boundaries_path, "Boundaries path");
    auto* apply_out = apply_cmd->add_option("--out", apply.out_path, "Enhanced bank output path");
    apply_cmd->callback([&] {
        const json cfg = load_config_file(apply.config);
        cfg_override(apply_bank, cfg, "bank", apply.bank_path);
        cfg_override(apply_fmt, cfg, "format", apply.format);
        cfg_override(apply_labels, cfg, "labels", apply.labels);
        cfg_override(apply_bounds, cfg, "boundaries", apply.boundaries_path);
        cfg_override(apply_out, cfg, "out", apply.out_path);
        if (apply.bank_path.empty() || apply.boundaries_path.empty() || apply.out_path.empty())
            throw std::invalid_argument("apply requires --bank, --boundaries and --out");
        run_data_stage([&] { run_apply(apply); });
    });

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score ID/OOD query sets and report AUROC/FPR95");
    eval_cmd->add_option("--config", ev.config, "JSON config file");
    auto* ev_bank = eval_cmd->add_option("--bank", ev.bank_path, "Training bank path");
    auto* ev_id = eval_cmd->add_option("--id", ev.id_path, "ID query bank path");
    auto* ev_ood = eval_cmd->add_option("--ood", ev.ood_path, "OOD query bank path");
    auto* ev_head = eval_cmd->add_option("--head", ev.head_path, "Linear head path");
    auto* ev_fmt = eval_cmd->add_option("--format", ev.format, "Bank format: binary|csv")
                       ->check(CLI::IsMember({"binary", "csv"}));
    auto* ev_labels = eval_cmd->add_flag("--labels", ev.labels, "CSV bank has a label column");
    auto* ev_score =
        eval_cmd->add_option("--score", ev.score,
                             "Score kind: knn|mahalanobis|nnguide|energy|msp|maxlogit");
    auto* ev_k = eval_cmd->add_option("--k", ev.k, "Neighbor count for knn/nnguide");
    auto* ev_temp = eval_cmd->add_option("--temperature", ev.temperature, "Energy temperature")
                        ->check(CLI::PositiveNumber);
    auto* ev_react = eval_cmd
                         ->add_option("--react-percentile", ev.react_percentile,
                                      "Clip activations at this bank percentile before scoring")
                         ->check(CLI::Range(0.0, 100.0));
    auto* ev_order = eval_cmd
                         ->add_option("--react-order", ev.react_order,
                                      "bank-and-queries (clip before fitting) or queries-only")
                         ->check(CLI::IsMember({"bank-and-queries", "queries-only"}));
    auto* ev_bounds = eval_cmd->add_option("--boundaries", ev.boundaries_path,
                                           "Pre-fitted boundaries for the enhanced run");
    auto* ev_lambda = eval_cmd->add_option("--lambda", ev.lambda,
                                           "Fit boundaries on the bank at this percentile");
    auto* ev_out = eval_cmd->add_option("--out", ev.out_path, "Report JSON path (default stdout)");
    auto* ev_scores = eval_cmd->add_option("--scores-out", ev.scores_out,
                                           "Directory for per-query score CSVs");
    eval_cmd->callback([&] {
        const json cfg = load_config_file(ev.config);
        cfg_override(ev_bank, cfg, "bank", ev.bank_path);
        cfg_override(ev_id, cfg, "id", ev.id_path);
        cfg_override(ev_ood, cfg, "ood", ev.ood_path);
        cfg_override(ev_head, cfg, "head", ev.head_path);
        cfg_override(ev_fmt, cfg, "format", ev.format);
        cfg_override(ev_labels, cfg, "labels", ev.labels);
        cfg_override(ev_score, cfg, "score", ev.score);
        cfg_override(ev_k, cfg, "k", ev.k);
        cfg_override(ev_temp, cfg, "temperature", ev.temperature);
        cfg_override(ev_react, cfg, "react_percentile", ev.react_percentile);
        cfg_override(ev_order, cfg, "react_order", ev.react_order);
        cfg_override(ev_bounds, cfg, "boundaries", ev.boundaries_path);
        cfg_override(ev_lambda, cfg, "lambda", ev.lambda);
        cfg_override(ev_out, cfg, "out", ev.out_path);
        cfg_override(ev_scores, cfg, "scores_out", ev.scores_out);
        if (ev.bank_path.empty() || ev.id_path.empty() || ev.ood_path.empty())
            throw std::invalid_argument("eval requires --bank, --id and --ood");
        validate_score_flags(ev.score, ev.k, ev.head_path);
        if (!ev.boundaries_path.empty() && ev.lambda >= 0.0)
            throw std::invalid_argument("--boundaries and --lambda are mutually exclusive");
        if (ev.lambda > 100.0) throw std::invalid_argument("--lambda must be in [0, 100]");
        if (ev.react_order != "bank-and-queries" && ev.react_order != "queries-only")
            throw std::invalid_argument("--react-order must be bank-and-queries or queries-only");
        if (ev.react_percentile < 0.0 || ev.react_percentile > 100.0)
            throw std::invalid_argument("--react-percentile must be in (0, 100]");
        run_data_stage([&] { run_eval(ev); });
    });

    SweepArgs sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a list of retention percentiles");
    sweep_cmd->add_option("--config", sw.config, "JSON config file");
    auto* sw_bank = sweep_cmd->add_option("--bank", sw.bank_path, "Training bank path");
    auto* sw_id = sweep_cmd->add_option("--id", sw.id_path, "ID query bank path");
    auto* sw_ood = sweep_cmd->add_option("--ood", sw.ood_path, "OOD query bank path");
    auto* sw_head = sweep_cmd->add_option("--head", sw.head_path, "Linear head path");
    auto* sw_fmt = sweep_cmd->add_option("--format", sw.format, "Bank format: binary|csv")
                       ->check(CLI::IsMember({"binary", "csv"}));
    auto* sw_labels = sweep_cmd->add_flag("--labels", sw.labels, "CSV bank has a label column");
    auto* sw_score = sweep_cmd->add_option("--score", sw.score, "Score kind");
    auto* sw_k = sweep_cmd->add_option("--k", sw.k, "Neighbor count for knn/nnguide");
    auto* sw_temp = sweep_cmd->add_option("--temperature", sw.temperature, "Energy temperature")
                        ->check(CLI::PositiveNumber);
    auto* sw_lambdas =
        sweep_cmd->add_option("--lambdas", sw.lambdas, "Comma-separated retention percentiles");
    auto* sw_out = sweep_cmd->add_option("--out", sw.out_path, "CSV output path");
    sweep_cmd->callback([&] {
        const json cfg = load_config_file(sw.config);
        cfg_override(sw_bank, cfg, "bank", sw.bank_path);
        cfg_override(sw_id, cfg, "id", sw.id_path);
        cfg_override(sw_ood, cfg, "ood", sw.ood_path);
        cfg_override(sw_head, cfg, "head", sw.head_path);
        cfg_override(sw_fmt, cfg, "format", sw.format);
        cfg_override(sw_labels, cfg, "labels", sw.labels);
        cfg_override(sw_score, cfg, "score", sw.score);
        cfg_override(sw_k, cfg, "k", sw.k);
        cfg_override(sw_temp, cfg, "temperature", sw.temperature);
        cfg_override(sw_lambdas, cfg, "lambdas", sw.lambdas);
        cfg_override(sw_out, cfg, "out", sw.out_path);
        if (sw.bank_path.empty() || sw.id_path.empty() || sw.ood_path.empty() ||
            sw.lambdas.empty())
            throw std::invalid_argument("sweep requires --bank, --id, --ood and --lambdas");
        validate_score_flags(sw.score, sw.k, sw.head_path);
        for (double l : parse_number_list(sw.lambdas, "--lambdas"))
            if (!(l >= 0.0 && l <= 100.0))
                throw std::invalid_argument("lambda " + format_double(l) + " outside [0, 100]");
        run_data_stage([&] { run_sweep(sw); });
    });

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo clamping-benefit surface");
    sim_cmd->add_option("--config", sim.config, "JSON config file");
    auto* sim_trials = sim_cmd->add_option("--trials", sim.trials, "Trials per grid point")
                           ->check(CLI::PositiveNumber);
    auto* sim_seed = sim_cmd->add_option("--seed", sim.seed, "RNG seed (required)");
    auto* sim_dim = sim_cmd->add_option("--dim", sim.dim, "Feature dimension")
                        ->check(CLI::PositiveNumber);
    auto* sim_sin = sim_cmd->add_option("--sigma-in", sim.sigma_in, "ID standard deviation")
                        ->check(CLI::PositiveNumber);
    auto* sim_clamp = sim_cmd->add_option("--clamp", sim.clamp, "Absolute clamp radius")
                          ->check(CLI::PositiveNumber);
    auto* sim_sout =
        sim_cmd->add_option("--sigma-out", sim.sigma_out, "Comma-separated sigma_out values");
    auto* sim_eps =
        sim_cmd->add_option("--epsilon", sim.epsilon, "Comma-separated skewness values");
    auto* sim_out = sim_cmd->add_option("--out", sim.out_path, "Surface CSV path");
    sim_cmd->callback([&] {
        const json cfg = load_config_file(sim.config);
        cfg_override(sim_trials, cfg, "trials", sim.trials);
        cfg_override(sim_seed, cfg, "seed", sim.seed);
        cfg_override(sim_dim, cfg, "dim", sim.dim);
        cfg_override(sim_sin, cfg, "sigma_in", sim.sigma_in);
        cfg_override(sim_clamp, cfg, "clamp", sim.clamp);
        cfg_override(sim_sout, cfg, "sigma_out", sim.sigma_out);
        cfg_override(sim_eps, cfg, "epsilon", sim.epsilon);
        cfg_override(sim_out, cfg, "out", sim.out_path);
        if (sim_seed->count() == 0 && !cfg.contains("seed"))
            throw std::invalid_argument("simulate requires an explicit --seed");
        run_simulate(sim);
    });

    SynthArgs sy;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic near/far-OOD benchmark");
    synth_cmd->add_option("--config", sy.config, "JSON config file");
    auto* sy_classes = synth_cmd->add_option("--classes", sy.classes, "Class count");
    auto* sy_dim = synth_cmd->add_option("--dim", sy.dim, "Feature dimension");
    auto* sy_per = synth_cmd->add_option("--per-class", sy.per_class, "Training rows per class");
    auto* sy_spread =
        synth_cmd->add_option("--class-spread", sy.class_spread, "Within-class std deviation");
    auto* sy_near = synth_cmd->add_option("--near-shift", sy.near_shift, "Near-OOD offset");
    auto* sy_far = synth_cmd->add_option("--far-shift", sy.far_shift, "Far-OOD offset");
    auto* sy_heavy = synth_cmd->add_option("--heavy-tail-frac", sy.heavy_tail_frac,
                                           "Extreme training-row fraction");
    auto* sy_q = synth_cmd->add_option("--queries-per-class", sy.queries_per_class,
                                       "Query rows per class per set");
    auto* sy_seed = synth_cmd->add_option("--seed", sy.seed, "RNG seed (required)");
    auto* sy_out = synth_cmd->add_option("--out-dir", sy.out_dir, "Output directory");
    synth_cmd->callback([&] {
        const json cfg = load_config_file(sy.config);
        cfg_override(sy_classes, cfg, "classes", sy.classes);
        cfg_override(sy_dim, cfg, "dim", sy.dim);
        cfg_override(sy_per, cfg, "per_class", sy.per_class);
        cfg_override(sy_spread, cfg, "class_spread", sy.class_spread);
        cfg_override(sy_near, cfg, "near_shift", sy.near_shift);
        cfg_override(sy_far, cfg, "far_shift", sy.far_shift);
        cfg_override(sy_heavy, cfg, "heavy_tail_frac", sy.heavy_tail_frac);
        cfg_override(sy_q, cfg, "queries_per_class", sy.queries_per_class);
        cfg_override(sy_seed, cfg, "seed", sy.seed);
        cfg_override(sy_out, cfg, "out_dir", sy.out_dir);
        if (sy_seed->count() == 0 && !cfg.contains("seed"))
            throw std::invalid_argument("synth requires an explicit --seed");
        run_synth(sy);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

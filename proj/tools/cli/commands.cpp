#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "kjm/c3d.hpp"
#include "kjm/dataset_io.hpp"
#include "kjm/error.hpp"
#include "kjm/model_bundle.hpp"
#include "kjm/pipeline.hpp"

#ifndef KJM_VERSION
#define KJM_VERSION "0.0.0"
#endif

namespace kjm::cli {

namespace {

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json train_config_json(const cnn::TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"transferred_layer_lr_multiplier", c.transferred_layer_lr_multiplier},
            {"seed", c.seed}};
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

/// The split a model was trained under, recorded in its info map.
struct SplitRecord {
    std::string kind;
    double ratio = 0.0;
    std::size_t k = 0;
    std::size_t fold = 0;
    std::uint64_t seed = 0;
    std::string signature;
};

SplitRecord split_record(const ModelBundle& m, const fs::path& path) {
    try {
        SplitRecord s;
        s.kind = m.info.at("split_kind");
        s.seed = std::stoull(m.info.at("split_seed"));
        s.signature = m.info.at("fold_signature");
        if (s.kind == "holdout") {
            s.ratio = std::stod(m.info.at("split_ratio"));
        } else if (s.kind == "kfold") {
            s.k = std::stoul(m.info.at("kfold_k"));
            s.fold = std::stoul(m.info.at("kfold_index"));
        } else {
            fail(ErrorCode::CorruptFile, "unknown split kind '" + s.kind + "'");
        }
        return s;
    } catch (const std::out_of_range&) {
        fail(ErrorCode::FoldMismatch, path.string() + " carries no split record");
    } catch (const std::invalid_argument&) {
        fail(ErrorCode::CorruptFile, path.string() + " has a malformed split record");
    }
}

Partition partition_for(const Dataset& ds, const SplitRecord& s) {
    if (s.kind == "holdout") return split_indices(ds.rows(), s.ratio, s.seed);
    if (s.fold >= s.k || s.k > ds.rows()) {
        fail(ErrorCode::FoldMismatch, "fold record does not fit the dataset");
    }
    return kfold_indices(ds.rows(), s.k, s.seed)[s.fold];
}

std::vector<ModelBundle> fit_all(const Dataset& train, const cnn::ArchitectureSpec& arch,
                                 const cnn::TrainConfig& config, const ModelBundle* donor, const Logger& log,
                                 std::vector<std::vector<double>>* histories) {
    FitOptions opt;
    opt.arch = arch;
    opt.train = config;
    const ScalerParams scaler = donor != nullptr ? donor->scaler : fit_scaler(train.X);
    const auto images = encode_rows(train, scaler);
    std::vector<ModelBundle> out;
    for (const auto& name : train.waveform_names) {
        opt.train.on_epoch = [&](std::size_t epoch, double loss) {
            log(name + " epoch " + std::to_string(epoch) + " loss " + fmt("%.6g", loss));
        };
        auto fit = fit_waveform(train, name, opt, donor, &images);
        if (histories != nullptr) histories->push_back(std::move(fit.loss_history));
        out.push_back(std::move(fit.bundle));
    }
    return out;
}

void record_split(ModelBundle& m, const SplitRecord& s) {
    m.info["split_kind"] = s.kind;
    m.info["split_seed"] = std::to_string(s.seed);
    m.info["fold_signature"] = s.signature;
    if (s.kind == "holdout") {
        m.info["split_ratio"] = fmt("%.17g", s.ratio);
    } else {
        m.info["kfold_k"] = std::to_string(s.k);
        m.info["kfold_index"] = std::to_string(s.fold);
    }
}

EvaluationReport score(const std::vector<ModelBundle>& models, const Dataset& test, double window,
                       const std::string& signature) {
    auto report = evaluate_models(models, test, window);
    report.fold_signature = signature;
    return report;
}

std::string dataset_stem(Movement m, Limb limb) { return std::string(to_string(m)) + "_" + to_char(limb); }

}  // namespace

std::string tool_version() { return KJM_VERSION; }

Logger stderr_logger() {
    return [](const std::string& msg) { std::cerr << "kjm: " << msg << '\n'; };
}

nlohmann::json to_json(const RunManifest& m) {
    return {{"command", m.command},   {"config", m.config},         {"seed", m.seed},
            {"inputs", m.inputs},     {"outputs", m.outputs},       {"tool_version", m.tool_version},
            {"started", m.started},   {"finished", m.finished}};
}

void write_manifest(const RunManifest& m, const fs::path& path) { write_text(path, to_json(m).dump(2) + "\n"); }

fs::path manifest_path_for(const fs::path& artifact) {
    return artifact.parent_path() / (artifact.filename().string() + ".manifest.json");
}

SynthResult cmd_synth(const SynthOptions& options, const Logger& log) {
    if (options.count == 0) fail(ErrorCode::InvalidArgument, "--n must be at least 1");
    RunManifest man{"synth", {}, options.seed, {}, {}, tool_version(), utc_now(), {}};
    man.config = {{"kind", synth::to_string(options.kind)},
                  {"n", options.count},
                  {"limb", std::string(1, to_char(options.stance_limb))},
                  {"noise_sd", options.noise_sd},
                  {"force_noise_sd", options.force_noise_sd},
                  {"crossover_rate", options.crossover_rate}};
    fs::create_directories(options.out_dir);
    synth::DrawOptions draw{options.stance_limb, options.noise_sd, options.force_noise_sd, options.crossover_rate};
    const auto recipes = synth::draw_recipes(options.count, options.kind, options.seed, draw);
    SynthResult result;
    for (std::size_t i = 0; i < recipes.size(); ++i) {
        const auto id = synth::source_id(options.kind, i);
        const auto trial = synth::generate_trial(recipes[i], id);
        if (trial.expected_movement == Movement::Crossover) ++result.scripted_rejects;
        const auto path = options.out_dir / (id + ".c3d");
        c3d::write_file(synth::to_c3d(trial), path);
        man.outputs.push_back(path.filename().string());
        ++result.written;
    }
    log("wrote " + std::to_string(result.written) + " trials (" + std::to_string(result.scripted_rejects) +
        " scripted crossovers) to " + options.out_dir.string());
    man.finished = utc_now();
    write_manifest(man, options.out_dir / "manifest.json");
    return result;
}

IngestResult cmd_ingest(const IngestOptions& options, const Logger& log) {
    if (!fs::is_directory(options.c3d_dir)) {
        fail(ErrorCode::IoError, "C3D directory " + options.c3d_dir.string() + " does not exist");
    }
    RunManifest man{"ingest", {}, 0, {}, {}, tool_version(), utc_now(), {}};
    const auto& th = options.prep.thresholds;
    const auto& rule = options.prep.rule;
    man.config = {{"c3d_dir", options.c3d_dir.string()},
                  {"fs_force", th.fs_force},
                  {"fs_hold", th.fs_hold},
                  {"to_force", th.to_force},
                  {"walk_run_speed", rule.walk_run_speed},
                  {"sidestep_angle", rule.sidestep_angle}};
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(options.c3d_dir)) {
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (entry.is_regular_file() && ext == ".c3d") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    IngestResult result;
    result.files = files.size();
    if (files.empty()) {
        fail(ErrorCode::EmptyDataset, "found 0 C3D files in " + options.c3d_dir.string());
    }

    std::map<std::pair<Movement, Limb>, std::vector<TrialSample>> groups;
    for (const auto& path : files) {
        const auto id = path.stem().string();
        man.inputs.push_back(path.filename().string());
        try {
            const auto file = c3d::read_file(path);
            auto sample = prepare_trial(trial_input_from_c3d(file, id), options.prep);
            if (sample.movement == Movement::Crossover) {
                result.rejects.push_back({id, "Crossover"});
                continue;
            }
            groups[{sample.movement, sample.stance_limb}].push_back(std::move(sample));
        } catch (const Error& e) {
            result.rejects.push_back({id, std::string(to_string(e.code()))});
            log(id + ": " + e.what());
        }
    }

    fs::create_directories(options.out_dir);
    for (const auto& [key, samples] : groups) {
        const auto stem = dataset_stem(key.first, key.second);
        bool counted = false;
        for (auto kind : {ResponseKind::KJM, ResponseKind::GRFM}) {
            const bool any = std::any_of(samples.begin(), samples.end(),
                                         [&](const TrialSample& s) { return s.response(kind) != nullptr; });
            if (!any) continue;
            HygieneLog hygiene;
            const auto ds = assemble_dataset(samples, key.first, key.second, kind, &hygiene);
            std::string ext = kind == ResponseKind::KJM ? ".kjm.ktb" : ".grfm.ktb";
            const auto path = options.out_dir / (stem + ext);
            save_dataset(ds, path);
            result.datasets.push_back(path);
            man.outputs.push_back(path.filename().string());
            log(path.filename().string() + ": " + std::to_string(ds.rows()) + " rows");
            if (!counted) {
                result.accepted += ds.rows();
                result.rejects.insert(result.rejects.end(), hygiene.begin(), hygiene.end());
                counted = true;
            }
        }
    }
    std::sort(result.rejects.begin(), result.rejects.end(),
              [](const Rejection& a, const Rejection& b) { return a.source_id < b.source_id; });
    std::string text;
    for (const auto& r : result.rejects) text += r.source_id + "\t" + r.reason + "\n";
    write_text(options.out_dir / "hygiene.log", text);
    man.outputs.push_back("hygiene.log");
    log("accepted " + std::to_string(result.accepted) + " of " + std::to_string(files.size()) + " trials, " +
        std::to_string(result.rejects.size()) + " rejected");
    if (result.accepted == 0) {
        fail(ErrorCode::EmptyDataset, "0 of " + std::to_string(files.size()) + " trials accepted");
    }
    man.finished = utc_now();
    write_manifest(man, options.out_dir / "manifest.json");
    return result;
}

cnn::ArchitectureSpec resolve_arch(const std::string& name) {
    if (name == "desk") return cnn::ArchitectureSpec::desk();
    if (name == "reference") return cnn::ArchitectureSpec::reference();
    return cnn::ArchitectureSpec::parse(name);
}

TrainResult cmd_train(const TrainOptions& options, const Logger& log) {
    const auto ds = load_dataset(options.dataset);
    const auto arch = resolve_arch(options.arch);
    const auto part = split_indices(ds.rows(), options.split.ratio, options.split.seed);
    const Dataset train = ds.subset(part.train);
    SplitRecord record{"holdout", options.split.ratio, 0, 0, options.split.seed, fold_signature(ds, part)};

    std::vector<std::string> waveforms;
    if (options.waveform == "all") {
        waveforms = ds.waveform_names;
    } else if (ds.waveform_index(options.waveform)) {
        waveforms = {options.waveform};
    } else {
        fail(ErrorCode::InvalidArgument, "dataset has no waveform '" + options.waveform + "'");
    }

    std::optional<ModelBundle> donor;
    if (!options.init.empty()) donor = load_model(options.init);

    RunManifest man{"train", {}, options.train.seed, {options.dataset.string()}, {}, tool_version(), utc_now(), {}};
    man.config = {{"waveform", options.waveform},
                  {"arch", arch.describe()},
                  {"train", train_config_json(options.train)},
                  {"split_ratio", options.split.ratio},
                  {"split_seed", options.split.seed},
                  {"init", options.init.string()},
                  {"train_rows", train.rows()}};
    if (donor) man.inputs.push_back(options.init.string());

    FitOptions opt;
    opt.arch = arch;
    opt.train = options.train;
    const ScalerParams scaler = donor ? donor->scaler : fit_scaler(train.X);
    const auto images = encode_rows(train, scaler);

    TrainResult result;
    for (const auto& name : waveforms) {
        const fs::path out = options.waveform == "all" ? options.out / (name + ".kwt") : options.out;
        const fs::path loss_path = out.parent_path() / (out.filename().string() + ".loss.json");
        opt.train.on_epoch = [&](std::size_t epoch, double loss) {
            log(name + " epoch " + std::to_string(epoch) + " loss " + fmt("%.6g", loss));
        };
        try {
            auto fit = fit_waveform(train, name, opt, donor ? &*donor : nullptr, &images);
            record_split(fit.bundle, record);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            save_model(fit.bundle, out);
            write_text(loss_path, nlohmann::json{{"waveform", name}, {"loss", fit.loss_history}}.dump(2) + "\n");
            log(name + ": " + cnn::to_string(fit.bundle.network.provenance) + " model saved to " + out.string());
            man.outputs.push_back(out.string());
            man.outputs.push_back(loss_path.string());
            result.models.push_back(out);
            result.loss_histories.push_back(std::move(fit.loss_history));
        } catch (const cnn::DivergenceError& e) {
            write_text(loss_path,
                       nlohmann::json{{"waveform", name}, {"loss", e.history}, {"diverged", true}}.dump(2) + "\n");
            log(name + ": training diverged; partial loss history saved to " + loss_path.string());
            throw;
        }
    }
    man.finished = utc_now();
    write_manifest(man, options.waveform == "all" ? options.out / "manifest.json" : manifest_path_for(options.out));
    return result;
}

EvaluationReport cmd_evaluate(const EvaluateOptions& options, const Logger& log) {
    if (options.models.empty()) fail(ErrorCode::InvalidArgument, "no models given");
    if (options.use_train_split && !options.allow_train_eval) {
        fail(ErrorCode::InvalidArgument, "refusing to evaluate on the training split without --allow-train-eval");
    }
    const auto ds = load_dataset(options.dataset);
    std::vector<ModelBundle> models;
    std::optional<SplitRecord> split;
    for (const auto& path : options.models) {
        models.push_back(load_model(path));
        const auto rec = split_record(models.back(), path);
        if (split && rec.signature != split->signature) {
            fail(ErrorCode::FoldMismatch, path.string() + " was trained on a different split than the other models");
        }
        split = rec;
    }
    const auto part = partition_for(ds, *split);
    const auto signature = fold_signature(ds, part);
    if (signature != split->signature) {
        fail(ErrorCode::FoldMismatch, "dataset fold signature " + signature + " differs from the models' " +
                                          split->signature);
    }
    const Dataset rows = ds.subset(options.use_train_split ? part.train : part.test);
    const auto report = score(models, rows, options.window, signature);

    const fs::path md = options.report;
    fs::path json = md;
    json.replace_extension(".json");
    write_text(md, report_markdown({report}));
    write_text(json, report_json(report));
    log("evaluated " + std::to_string(rows.rows()) + " trials, mean r " + fmt("%.4f", report.kjm_mean_r));

    RunManifest man{"evaluate", {}, 0, {options.dataset.string()}, {md.string(), json.string()}, tool_version(),
                    utc_now(), {}};
    for (const auto& p : options.models) man.inputs.push_back(p.string());
    man.config = {{"window", options.window},
                  {"split", options.use_train_split ? "train" : "test"},
                  {"fold_signature", signature}};
    man.finished = utc_now();
    write_manifest(man, manifest_path_for(md));
    return report;
}

KfoldResult cmd_kfold(const KfoldOptions& options, const Logger& log) {
    const auto ds = load_dataset(options.dataset);
    const auto arch = resolve_arch(options.arch);
    const auto parts = kfold_indices(ds.rows(), options.k, options.seed);
    RunManifest man{"kfold", {}, options.train.seed, {options.dataset.string()}, {}, tool_version(), utc_now(), {}};
    man.config = {{"k", options.k},
                  {"split_seed", options.seed},
                  {"arch", arch.describe()},
                  {"train", train_config_json(options.train)},
                  {"window", options.window}};
    fs::create_directories(options.out_dir);

    KfoldResult result;
    for (std::size_t f = 0; f < parts.size(); ++f) {
        log("fold " + std::to_string(f + 1) + "/" + std::to_string(parts.size()));
        const SplitRecord record{"kfold", 0.0, options.k, f, options.seed, fold_signature(ds, parts[f])};
        auto models = fit_all(ds.subset(parts[f].train), arch, options.train, nullptr, log, nullptr);
        const fs::path dir = options.out_dir / ("fold_" + std::to_string(f));
        fs::create_directories(dir);
        for (auto& m : models) {
            record_split(m, record);
            save_model(m, dir / (m.info.at("waveform") + ".kwt"));
        }
        auto report = score(models, ds.subset(parts[f].test), options.window, record.signature);
        write_text(dir / "report.json", report_json(report));
        man.outputs.push_back(dir.string());
        result.folds.push_back(std::move(report));
    }

    std::vector<double> rs;
    for (const auto& r : result.folds) rs.push_back(r.kjm_mean_r);
    const double n = static_cast<double>(rs.size());
    result.mean_r = std::accumulate(rs.begin(), rs.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : rs) ss += (r - result.mean_r) * (r - result.mean_r);
    result.sd_r = rs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;

    std::string md = "| Fold | Mean r |\n|---|---|\n";
    for (std::size_t f = 0; f < rs.size(); ++f) md += "| " + std::to_string(f + 1) + " | " + fmt("%.4f", rs[f]) + " |\n";
    md += "| Mean ± SD | " + fmt("%.4f", result.mean_r) + " ± " + fmt("%.4f", result.sd_r) + " |\n";
    write_text(options.out_dir / "kfold.md", md);
    write_text(options.out_dir / "kfold.json",
               nlohmann::json{{"k", options.k}, {"fold_r", rs}, {"mean_r", result.mean_r}, {"sd_r", result.sd_r}}
                       .dump(2) +
                   "\n");
    log("fold mean r " + fmt("%.4f", result.mean_r) + " ± " + fmt("%.4f", result.sd_r));
    man.finished = utc_now();
    write_manifest(man, options.out_dir / "manifest.json");
    return result;
}

Comparison cmd_compare(const CompareOptions& options, const Logger& log) {
    const auto a = report_from_json(read_text(options.baseline));
    const auto b = report_from_json(read_text(options.candidate));
    const auto cmp = compare_runs(a, b);
    for (const auto& w : cmp.waveforms) {
        log(w.name + ": " + format_improvement(w.improvement) + " % (p = " + fmt("%.4g", w.p_value) + ")");
    }
    log("mean: " + format_improvement(cmp.mean.improvement) + " % (p = " + fmt("%.4g", cmp.mean.p_value) + ")");
    fs::path json = options.out;
    json.replace_extension(".json");
    write_text(options.out, report_markdown({b}, &cmp));
    write_text(json, comparison_json(cmp));
    RunManifest man{"compare", {}, 0, {options.baseline.string(), options.candidate.string()},
                    {options.out.string(), json.string()}, tool_version(), utc_now(), {}};
    man.finished = utc_now();
    write_manifest(man, manifest_path_for(options.out));
    return cmp;
}

}  // namespace kjm::cli

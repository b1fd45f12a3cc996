#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kjm/cnn.hpp"
#include "kjm/evaluation.hpp"
#include "kjm/synthetic.hpp"
#include "kjm/trial_prep.hpp"

namespace kjm::cli {

namespace fs = std::filesystem;

using Logger = std::function<void(const std::string&)>;

/// Logger writing "kjm: <message>" lines to standard error.
Logger stderr_logger();

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string tool_version;
    std::string started;
    std::string finished;
};

nlohmann::json to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const fs::path& path);

/// Manifest path that sits next to an artifact: "<artifact>.manifest.json".
fs::path manifest_path_for(const fs::path& artifact);

struct SynthOptions {
    synth::TrialKind kind = synth::TrialKind::Sidestep;
    std::size_t count = 100;
    std::uint64_t seed = 1;
    Limb stance_limb = Limb::Right;
    double noise_sd = 0.0;
    double force_noise_sd = 0.0;
    double crossover_rate = 0.05;
    fs::path out_dir;
};

struct SynthResult {
    std::size_t written = 0;
    /// trials scripted as crossovers (rejected later by ingest)
    std::size_t scripted_rejects = 0;
};

SynthResult cmd_synth(const SynthOptions& options, const Logger& log);

struct IngestOptions {
    fs::path c3d_dir;
    fs::path out_dir;
    PrepOptions prep;
};

struct IngestResult {
    std::size_t files = 0;
    std::size_t accepted = 0;
    HygieneLog rejects;
    std::vector<fs::path> datasets;
};

/// Parses every *.c3d in the directory (sorted by name; the stem is the source id),
/// writes one "<Movement>_<Limb>.kjm.ktb" / ".grfm.ktb" pair per group, hygiene.log
/// and manifest.json. Throws EmptyDataset when nothing is accepted.
IngestResult cmd_ingest(const IngestOptions& options, const Logger& log);

struct SplitOptions {
    double ratio = 0.8;
    std::uint64_t seed = 7;
};

struct TrainOptions {
    fs::path dataset;
    /// a waveform name, or "all" (then `out` is a directory of "<waveform>.kwt")
    std::string waveform = "all";
    std::string arch = "desk";
    cnn::TrainConfig train;
    SplitOptions split;
    fs::path init;
    fs::path out;
};

struct TrainResult {
    std::vector<fs::path> models;
    std::vector<std::vector<double>> loss_histories;
};

/// Arch names "desk" / "reference" or a descriptor string.
cnn::ArchitectureSpec resolve_arch(const std::string& name);

/// Trains on the train split only. A diverged run saves the last finite model and
/// its history before rethrowing.
TrainResult cmd_train(const TrainOptions& options, const Logger& log);

struct EvaluateOptions {
    fs::path dataset;
    std::vector<fs::path> models;
    double window = kDefaultEvalWindow;
    fs::path report;
    bool use_train_split = false;
    bool allow_train_eval = false;
};

/// Scores the test split recorded in the models; writes report.md and report.json
/// (same stem). Throws FoldMismatch when the dataset split disagrees with the models.
EvaluationReport cmd_evaluate(const EvaluateOptions& options, const Logger& log);

struct KfoldOptions {
    fs::path dataset;
    std::size_t k = 5;
    std::uint64_t seed = 7;
    std::string arch = "desk";
    cnn::TrainConfig train;
    double window = kDefaultEvalWindow;
    fs::path out_dir;
};

struct KfoldResult {
    std::vector<EvaluationReport> folds;
    double mean_r = 0.0;
    double sd_r = 0.0;
};

KfoldResult cmd_kfold(const KfoldOptions& options, const Logger& log);

struct CompareOptions {
    fs::path baseline;
    fs::path candidate;
    fs::path out;
};

Comparison cmd_compare(const CompareOptions& options, const Logger& log);

std::string tool_version();

}  // namespace kjm::cli

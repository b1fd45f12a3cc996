#include <exception>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace kjm;
using namespace kjm::cli;

namespace {

void add_train_flags(CLI::App* cmd, cnn::TrainConfig& train, std::string& arch) {
    cmd->add_option("--arch", arch, "desk, reference or a layer descriptor")->capture_default_str();
    cmd->add_option("--seed", train.seed, "weight-init and shuffle seed")->capture_default_str();
    cmd->add_option("--epochs", train.epochs)->capture_default_str();
    cmd->add_option("--lr", train.learning_rate, "base learning rate")->capture_default_str();
    cmd->add_option("--momentum", train.momentum)->capture_default_str();
    cmd->add_option("--batch", train.batch_size)->capture_default_str();
    cmd->add_option("--transfer-lr-mult", train.transferred_layer_lr_multiplier,
                    "learning-rate multiplier of transferred layers")
        ->capture_default_str();
}

const std::map<std::string, synth::TrialKind> kKinds = {
    {"walk", synth::TrialKind::Walk}, {"run", synth::TrialKind::Run}, {"sidestep", synth::TrialKind::Sidestep}};
const std::map<std::string, Limb> kLimbs = {{"L", Limb::Left}, {"R", Limb::Right}};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knee-joint moment regression from marker trajectories"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);
    const auto log = stderr_logger();

    SynthOptions synth_opt;
    std::string synth_kind = "sidestep";
    std::string synth_limb = "R";
    auto* synth_cmd = app.add_subcommand("synth", "Write oracle trials as C3D files");
    synth_cmd->add_option("--kind", synth_kind)->check(CLI::IsMember({"walk", "run", "sidestep"}))->capture_default_str();
    synth_cmd->add_option("--n", synth_opt.count, "number of trials")->capture_default_str();
    synth_cmd->add_option("--seed", synth_opt.seed)->capture_default_str();
    synth_cmd->add_option("--limb", synth_limb, "stance limb")->check(CLI::IsMember({"L", "R"}))->capture_default_str();
    synth_cmd->add_option("--noise", synth_opt.noise_sd, "marker noise sd (mm)")->capture_default_str();
    synth_cmd->add_option("--force-noise", synth_opt.force_noise_sd, "plate noise sd (N)")->capture_default_str();
    synth_cmd->add_option("--crossover-rate", synth_opt.crossover_rate)->capture_default_str();
    synth_cmd->add_option("--out", synth_opt.out_dir, "output directory")->required();

    IngestOptions ingest_opt;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse C3D files into trial datasets");
    ingest_cmd->add_option("--c3d-dir", ingest_opt.c3d_dir)->required();
    ingest_cmd->add_option("--out", ingest_opt.out_dir)->required();
    ingest_cmd->add_option("--fs-force", ingest_opt.prep.thresholds.fs_force, "strike threshold (N)")
        ->capture_default_str();
    ingest_cmd->add_option("--fs-hold", ingest_opt.prep.thresholds.fs_hold, "strike hold time (s)")
        ->capture_default_str();
    ingest_cmd->add_option("--to-force", ingest_opt.prep.thresholds.to_force, "toe-off threshold (N)")
        ->capture_default_str();
    ingest_cmd->add_option("--run-speed", ingest_opt.prep.rule.walk_run_speed, "walk/run boundary (m/s)")
        ->capture_default_str();
    ingest_cmd->add_option("--sidestep-angle", ingest_opt.prep.rule.sidestep_angle, "turn threshold (degrees)")
        ->capture_default_str();

    TrainOptions train_opt;
    auto* train_cmd = app.add_subcommand("train", "Fit per-waveform models on the train split");
    train_cmd->add_option("--dataset", train_opt.dataset)->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--waveform", train_opt.waveform, "waveform name or 'all'")->capture_default_str();
    add_train_flags(train_cmd, train_opt.train, train_opt.arch);
    train_cmd->add_option("--split", train_opt.split.ratio, "train share of the holdout split")->capture_default_str();
    train_cmd->add_option("--split-seed", train_opt.split.seed)->capture_default_str();
    train_cmd->add_option("--init", train_opt.init, "donor model for fine-tuning")->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_opt.out, "model file, or directory with --waveform all")->required();

    EvaluateOptions eval_opt;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score models on their held-out split");
    eval_cmd->add_option("--dataset", eval_opt.dataset)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--models", eval_opt.models)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--window", eval_opt.window, "leading share of each waveform")->capture_default_str();
    eval_cmd->add_option("--report", eval_opt.report, "markdown report; JSON goes next to it")->required();
    eval_cmd->add_flag("--train-split", eval_opt.use_train_split, "score the training rows instead");
    eval_cmd->add_flag("--allow-train-eval", eval_opt.allow_train_eval);

    KfoldOptions kfold_opt;
    auto* kfold_cmd = app.add_subcommand("kfold", "Train and score k folds");
    kfold_cmd->add_option("--dataset", kfold_opt.dataset)->required()->check(CLI::ExistingFile);
    kfold_cmd->add_option("--k", kfold_opt.k)->capture_default_str();
    kfold_cmd->add_option("--split-seed", kfold_opt.seed)->capture_default_str();
    add_train_flags(kfold_cmd, kfold_opt.train, kfold_opt.arch);
    kfold_cmd->add_option("--window", kfold_opt.window)->capture_default_str();
    kfold_cmd->add_option("--out", kfold_opt.out_dir)->required();

    CompareOptions cmp_opt;
    auto* cmp_cmd = app.add_subcommand("compare", "Relative improvement and Mann-Whitney p between two reports");
    cmp_cmd->add_option("--baseline", cmp_opt.baseline)->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("--candidate", cmp_opt.candidate)->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("--out", cmp_opt.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth_cmd) {
            synth_opt.kind = kKinds.at(synth_kind);
            synth_opt.stance_limb = kLimbs.at(synth_limb);
            cmd_synth(synth_opt, log);
        } else if (*ingest_cmd) {
            cmd_ingest(ingest_opt, log);
        } else if (*train_cmd) {
            cmd_train(train_opt, log);
        } else if (*eval_cmd) {
            cmd_evaluate(eval_opt, log);
        } else if (*kfold_cmd) {
            cmd_kfold(kfold_opt, log);
        } else if (*cmp_cmd) {
            cmd_compare(cmp_opt, log);
        }
    } catch (const std::exception& e) {
        std::cerr << "kjm: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "kjm/dataset_io.hpp"
#include "kjm/error.hpp"
#include "kjm/model_bundle.hpp"

using namespace kjm;
namespace fs = std::filesystem;

namespace {

const char* kSmallArch = "in3x227x227,conv4k7s8p0,pool3s2,fc8,out";

void quiet(const std::string&) {}

template <class Fn>
ErrorCode code_of(Fn fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoError;
}

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = fs::temp_directory_path() / ("kjm_unit_cli_" + std::to_string(::getpid()));
        fs::remove_all(root_);
        cli::SynthOptions so;
        so.count = 60;
        so.seed = 5;
        so.crossover_rate = 0.1;
        so.out_dir = root_ / "c3d";
        synth_ = cli::cmd_synth(so, quiet);
        cli::IngestOptions io;
        io.c3d_dir = so.out_dir;
        io.out_dir = root_ / "data";
        ingest_ = cli::cmd_ingest(io, quiet);
    }
    static void TearDownTestSuite() { fs::remove_all(root_); }

    static cli::TrainOptions train_options(const std::string& dataset, const std::string& waveform,
                                           const fs::path& out) {
        cli::TrainOptions to;
        to.dataset = root_ / "data" / dataset;
        to.waveform = waveform;
        to.arch = kSmallArch;
        to.train.epochs = 1;
        to.train.batch_size = 8;
        to.out = out;
        return to;
    }

    static fs::path root_;
    static cli::SynthResult synth_;
    static cli::IngestResult ingest_;
};

fs::path CliTest::root_;
cli::SynthResult CliTest::synth_;
cli::IngestResult CliTest::ingest_;

}  // namespace

TEST_F(CliTest, IngestRejectsExactlyTheScriptedCrossovers) {
    EXPECT_EQ(synth_.written, 60u);
    EXPECT_EQ(ingest_.files, 60u);
    EXPECT_GT(synth_.scripted_rejects, 0u);
    EXPECT_EQ(ingest_.accepted, synth_.written - synth_.scripted_rejects);
    for (const auto& r : ingest_.rejects) EXPECT_EQ(r.reason, "Crossover");
    EXPECT_EQ(ingest_.rejects.size(), synth_.scripted_rejects);
    EXPECT_TRUE(fs::exists(root_ / "data" / "SidestepL_R.kjm.ktb"));
    EXPECT_TRUE(fs::exists(root_ / "data" / "SidestepL_R.grfm.ktb"));
    EXPECT_TRUE(fs::exists(root_ / "data" / "hygiene.log"));
    const auto man = nlohmann::json::parse(std::ifstream(root_ / "data" / "manifest.json"));
    EXPECT_EQ(man.at("command"), "ingest");
}

TEST_F(CliTest, EmptyDirectoryIsAnError) {
    const auto empty = root_ / "empty";
    fs::create_directories(empty);
    cli::IngestOptions io;
    io.c3d_dir = empty;
    io.out_dir = root_ / "empty_out";
    EXPECT_EQ(code_of([&] { cli::cmd_ingest(io, quiet); }), ErrorCode::EmptyDataset);
}

TEST_F(CliTest, TrainingSplitNeedsExplicitPermission) {
    const auto to = train_options("SidestepL_R.kjm.ktb", "all", root_ / "guard" / "models");
    const auto trained = cli::cmd_train(to, quiet);
    cli::EvaluateOptions eo;
    eo.dataset = to.dataset;
    eo.models = trained.models;
    eo.report = root_ / "guard" / "report.md";
    eo.use_train_split = true;
    EXPECT_EQ(code_of([&] { cli::cmd_evaluate(eo, quiet); }), ErrorCode::InvalidArgument);
    eo.allow_train_eval = true;
    const auto on_train = cli::cmd_evaluate(eo, quiet);
    eo.use_train_split = false;
    const auto on_test = cli::cmd_evaluate(eo, quiet);
    EXPECT_NE(on_train.fold_signature, "");
    EXPECT_EQ(on_test.waveforms.size(), 3u);
    EXPECT_EQ(on_test.fold_signature, on_train.fold_signature);
    EXPECT_TRUE(fs::exists(root_ / "guard" / "report.json"));
}

TEST_F(CliTest, ProvenanceFollowsInitialization) {
    const auto donor = cli::cmd_train(train_options("SidestepL_R.grfm.ktb", "Fz", root_ / "prov" / "fz.kwt"), quiet);
    auto to = train_options("SidestepL_R.kjm.ktb", "RKJMy", root_ / "prov" / "scratch.kwt");
    const auto scratch = load_model(cli::cmd_train(to, quiet).models[0]);
    EXPECT_EQ(scratch.network.provenance, cnn::Provenance::Scratch);
    EXPECT_TRUE(scratch.network.donor_id.empty());

    to.init = donor.models[0];
    to.out = root_ / "prov" / "cascade.kwt";
    const auto cascade = load_model(cli::cmd_train(to, quiet).models[0]);
    const auto fz = load_model(donor.models[0]);
    EXPECT_EQ(cascade.network.provenance, cnn::Provenance::Cascade);
    EXPECT_EQ(cascade.network.donor_id, cnn::weights_digest(fz.network));
    EXPECT_EQ(cascade.scaler, fz.scaler);
    EXPECT_EQ(cascade.network.chain, (std::vector<std::string>{"scratch:GRFM", "cascade:KJM"}));
}

TEST_F(CliTest, EvaluateDetectsForeignSplit) {
    const auto to = train_options("SidestepL_R.kjm.ktb", "RKJMz", root_ / "fold" / "z.kwt");
    // the split record is checked before any waveform is scored
    const auto trained = cli::cmd_train(to, quiet);
    auto ds = load_dataset(to.dataset);
    std::vector<std::size_t> keep(ds.rows() - 1);
    std::iota(keep.begin(), keep.end(), 1);
    save_dataset(ds.subset(keep), root_ / "fold" / "fewer.ktb");
    cli::EvaluateOptions eo;
    eo.dataset = root_ / "fold" / "fewer.ktb";
    eo.models = trained.models;
    eo.report = root_ / "fold" / "report.md";
    EXPECT_EQ(code_of([&] { cli::cmd_evaluate(eo, quiet); }), ErrorCode::FoldMismatch);
}

TEST_F(CliTest, UnknownWaveformIsRejected) {
    const auto to = train_options("SidestepL_R.kjm.ktb", "nope", root_ / "bad" / "x.kwt");
    EXPECT_EQ(code_of([&] { cli::cmd_train(to, quiet); }), ErrorCode::InvalidArgument);
}

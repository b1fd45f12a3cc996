#include <gtest/gtest.h>

#include <filesystem>

#include "kjm/dataset_io.hpp"
#include "kjm/error.hpp"
#include "kjm/model_bundle.hpp"
#include "kjm/pipeline.hpp"
#include "support/oracle_data.hpp"

using namespace kjm;

namespace {

ErrorCode decode_code(const std::vector<std::uint8_t>& bytes, bool model) {
    try {
        if (model) {
            decode_model(bytes);
        } else {
            decode_dataset(bytes);
        }
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode accepted damaged bytes";
    return ErrorCode::IoError;
}

const kjm::testing::OracleData& oracle() {
    static const auto data = kjm::testing::oracle_dataset(12, synth::TrialKind::Walk, 77);
    return data;
}

ModelBundle small_bundle() {
    const auto& ds = oracle().kjm;
    FitOptions opt;
    opt.arch = cnn::ArchitectureSpec::parse("in3x227x227,conv4k7s8p0,pool3s2,fc8,out");
    opt.train.epochs = 1;
    opt.train.batch_size = 4;
    auto fit = fit_waveform(ds, ds.waveform_names[0], opt);
    fit.bundle.info["note"] = "unit";
    return fit.bundle;
}

}  // namespace

TEST(ModelBundle, EncodeDecodeRoundTrip) {
    const auto bundle = small_bundle();
    ASSERT_FALSE(bundle.network.input_mean.empty());
    const auto bytes = encode_model(bundle);
    EXPECT_EQ(bytes[0], 'K');
    EXPECT_EQ(bytes[3], '1');
    const auto back = decode_model(bytes);
    EXPECT_EQ(back, bundle);
    EXPECT_EQ(encode_model(back), bytes);
    EXPECT_EQ(predict_waveform(back, oracle().kjm), predict_waveform(bundle, oracle().kjm));
}

TEST(ModelBundle, DiskRoundTrip) {
    const auto bundle = small_bundle();
    const auto path = std::filesystem::temp_directory_path() / "kjm_unit_bundle.kwt";
    save_model(bundle, path);
    EXPECT_EQ(load_model(path), bundle);
    std::filesystem::remove(path);
}

TEST(ModelBundle, DamagedBytesAreCorrupt) {
    const auto bytes = encode_model(small_bundle());
    auto truncated = bytes;
    truncated.resize(bytes.size() - 7);
    EXPECT_EQ(decode_code(truncated, true), ErrorCode::CorruptFile);
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_EQ(decode_code(magic, true), ErrorCode::CorruptFile);
    EXPECT_EQ(decode_code({}, true), ErrorCode::CorruptFile);
    EXPECT_THROW(load_model("/nonexistent/kjm_unit.kwt"), Error);
}

TEST(DatasetIo, RoundTripAndDamage) {
    for (const auto* ds : {&oracle().kjm, &oracle().grfm}) {
        const auto bytes = encode_dataset(*ds);
        EXPECT_EQ(decode_dataset(bytes), *ds);
        auto truncated = bytes;
        truncated.resize(bytes.size() / 2);
        EXPECT_EQ(decode_code(truncated, false), ErrorCode::CorruptFile);
    }
    const auto path = std::filesystem::temp_directory_path() / "kjm_unit_dataset.ktb";
    save_dataset(oracle().kjm, path);
    EXPECT_EQ(load_dataset(path), oracle().kjm);
    std::filesystem::remove(path);
}

TEST(DatasetIo, DatasetsAreNotModels) {
    EXPECT_EQ(decode_code(encode_dataset(oracle().kjm), true), ErrorCode::CorruptFile);
}

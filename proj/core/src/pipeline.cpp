#include "kjm/pipeline.hpp"

#include <cmath>
#include <numeric>

#include "kjm/error.hpp"

namespace kjm {

namespace {

std::size_t require_waveform(const Dataset& dataset, const std::string& name) {
    const auto idx = dataset.waveform_index(name);
    if (!idx) {
        fail(ErrorCode::InvalidArgument, "dataset has no waveform '" + name + "'");
    }
    return *idx;
}

}  // namespace

std::vector<cnn::Tensor> encode_rows(const Dataset& dataset, const ScalerParams& scaler) {
    std::vector<cnn::Tensor> out;
    out.reserve(dataset.rows());
    for (std::size_t r = 0; r < dataset.rows(); ++r) {
        out.push_back(std::move(encode_trial(dataset.x_row(r), scaler).pixels));
    }
    return out;
}

std::vector<double> waveform_rows(const Dataset& dataset, std::size_t waveform) {
    const std::size_t n = dataset.rows();
    const std::size_t len = dataset.waveform_length;
    std::vector<double> out(n * len);
    for (std::size_t r = 0; r < n; ++r) {
        const auto y = dataset.y_row(r);
        for (std::size_t i = 0; i < len; ++i) out[r * len + i] = y[waveform * len + i];
    }
    return out;
}

WaveformFit fit_waveform(const Dataset& train, const std::string& waveform, const FitOptions& options,
                         const ModelBundle* donor, const std::vector<cnn::Tensor>* images) {
    const std::size_t w = require_waveform(train, waveform);
    const std::size_t n = train.rows();
    const std::size_t len = train.waveform_length;
    const auto rows = waveform_rows(train, w);
    PcaModel pca = fit_pca(rows, len, options.pca_threshold, waveform);

    double total = std::accumulate(pca.eigenvalues.begin(), pca.eigenvalues.end(), 0.0);
    const double target_scale = total > 0.0 ? std::sqrt(total) : 1.0;
    std::vector<double> targets;
    targets.reserve(n * pca.k);
    for (std::size_t r = 0; r < n; ++r) {
        const auto c = project(pca, std::span<const double>(rows).subspan(r * len, len));
        for (double v : c) targets.push_back(v / target_scale);
    }

    const ScalerParams scaler = donor != nullptr ? donor->scaler : fit_scaler(train.X);
    std::vector<cnn::Tensor> local;
    if (images == nullptr) {
        local = encode_rows(train, scaler);
        images = &local;
    } else if (images->size() != n) {
        fail(ErrorCode::ShapeMismatch, "pre-encoded images do not match the dataset rows");
    }

    const std::string family = to_string(train.kind);
    cnn::WeightStore net = donor != nullptr
                               ? cnn::transfer(donor->network, options.arch, pca.k, options.train.seed, family)
                               : cnn::build(options.arch, pca.k, options.train.seed, family);
    if (donor == nullptr) {
        cnn::fit_input_normalization(net, *images);
    }
    auto trained = cnn::train(std::move(net), std::span<const cnn::Tensor>(*images), targets, options.train);

    WaveformFit fit;
    fit.bundle.network = std::move(trained.model);
    fit.bundle.pca.push_back(std::move(pca));
    fit.bundle.scaler = scaler;
    fit.bundle.target_scale = target_scale;
    fit.bundle.info["waveform"] = waveform;
    fit.bundle.info["response_kind"] = family;
    fit.bundle.info["train_rows"] = std::to_string(n);
    fit.bundle.info["seed"] = std::to_string(options.train.seed);
    fit.bundle.info["epochs"] = std::to_string(options.train.epochs);
    fit.loss_history = std::move(trained.loss_history);
    return fit;
}

std::vector<double> predict_waveform(const ModelBundle& model, const Dataset& dataset) {
    if (model.pca.empty()) {
        fail(ErrorCode::CorruptFile, "model bundle carries no PCA model");
    }
    const PcaModel& pca = model.pca.front();
    if (pca.length != dataset.waveform_length) {
        fail(ErrorCode::ShapeMismatch, "model waveform length differs from the dataset");
    }
    const std::size_t n = dataset.rows();
    std::vector<double> out;
    out.reserve(n * pca.length);
    std::vector<double> coeffs(pca.k);
    for (std::size_t r = 0; r < n; ++r) {
        const auto image = encode_trial(dataset.x_row(r), model.scaler);
        const auto raw = cnn::predict(model.network, image);
        for (std::size_t j = 0; j < pca.k; ++j) coeffs[j] = raw[j] * model.target_scale;
        const auto wave = reconstruct(pca, coeffs);
        out.insert(out.end(), wave.begin(), wave.end());
    }
    return out;
}

std::vector<double> predict_responses(const std::vector<ModelBundle>& models, const Dataset& dataset) {
    const std::size_t n = dataset.rows();
    const std::size_t w = dataset.waveform_names.size();
    const std::size_t len = dataset.waveform_length;
    std::vector<double> out(n * w * len);
    for (std::size_t k = 0; k < w; ++k) {
        const ModelBundle* model = nullptr;
        for (const auto& m : models) {
            if (!m.pca.empty() && m.pca.front().waveform_name == dataset.waveform_names[k]) model = &m;
        }
        if (model == nullptr) {
            fail(ErrorCode::InvalidArgument, "no model for waveform " + dataset.waveform_names[k]);
        }
        const auto pred = predict_waveform(*model, dataset);
        for (std::size_t r = 0; r < n; ++r) {
            std::copy_n(pred.begin() + static_cast<std::ptrdiff_t>(r * len), len,
                        out.begin() + static_cast<std::ptrdiff_t>((r * w + k) * len));
        }
    }
    return out;
}

std::vector<double> response_matrix(const Dataset& dataset) { return {dataset.Y.begin(), dataset.Y.end()}; }

EvaluationReport evaluate_models(const std::vector<ModelBundle>& models, const Dataset& test, double window) {
    const auto preds = predict_responses(models, test);
    const auto truths = response_matrix(test);
    auto report = evaluate(preds, truths, test.rows(), test.waveform_names, test.waveform_length, window);
    if (!test.meta.empty()) {
        report.movement = test.meta.front().movement;
        report.stance_limb = test.meta.front().stance_limb;
    }
    return report;
}

TrialInput trial_input_from_c3d(const c3d::File& file, std::string source_id, const c3d::LabelMatch& match) {
    TrialInput input;
    input.source_id = std::move(source_id);
    input.markers = c3d::extract_markers(file, match);
    input.plate = c3d::extract_force_plate(file, 0);
    const std::array<std::pair<Limb, const char*>, 2> moments = {{{Limb::Left, "LKneeMoment"},
                                                                  {Limb::Right, "RKneeMoment"}}};
    for (const auto& [limb, label] : moments) {
        if (c3d::find_point(file, label, match)) {
            input.knee_moments[static_cast<std::size_t>(limb)] = c3d::extract_point_series(file, label, match);
        }
    }
    return input;
}

}  // namespace kjm

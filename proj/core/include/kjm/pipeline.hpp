#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kjm/c3d.hpp"
#include "kjm/cnn.hpp"
#include "kjm/evaluation.hpp"
#include "kjm/model_bundle.hpp"
#include "kjm/trial_prep.hpp"

namespace kjm {

struct FitOptions {
    cnn::ArchitectureSpec arch = cnn::ArchitectureSpec::desk();
    cnn::TrainConfig train;
    double pca_threshold = kDefaultPcaThreshold;
};

struct WaveformFit {
    ModelBundle bundle;
    std::vector<double> loss_history;
};

/// Encoded images of every dataset row, flattened for the network.
std::vector<cnn::Tensor> encode_rows(const Dataset& dataset, const ScalerParams& scaler);

/// One waveform block of Y as n x L doubles.
std::vector<double> waveform_rows(const Dataset& dataset, std::size_t waveform);

/// Scaler + PCA + network for one waveform. With a donor, the donor's scaler is
/// kept and its non-output layers are transferred. `images` may carry
/// pre-encoded rows (they must match the scaler that will be used).
WaveformFit fit_waveform(const Dataset& train, const std::string& waveform, const FitOptions& options,
                         const ModelBundle* donor = nullptr, const std::vector<cnn::Tensor>* images = nullptr);

/// n x L waveform predictions from one bundle.
std::vector<double> predict_waveform(const ModelBundle& model, const Dataset& dataset);

/// n x W x L predictions in the dataset's waveform order; every waveform needs a model.
std::vector<double> predict_responses(const std::vector<ModelBundle>& models, const Dataset& dataset);

/// Dataset responses as doubles (n x W x L).
std::vector<double> response_matrix(const Dataset& dataset);

EvaluationReport evaluate_models(const std::vector<ModelBundle>& models, const Dataset& test,
                                 double window = kDefaultEvalWindow);

/// Markers, first force plate and optional "RKneeMoment"/"LKneeMoment" points.
TrialInput trial_input_from_c3d(const c3d::File& file, std::string source_id, const c3d::LabelMatch& match = {});

}  // namespace kjm

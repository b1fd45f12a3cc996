#include "kjm/model_bundle.hpp"

#include <cmath>

#include "container.hpp"

namespace kjm {

namespace {

constexpr std::string_view kMagic = "KWT1";

nlohmann::json pca_to_json(const PcaModel& m) {
    return {{"waveform", m.waveform_name}, {"length", m.length},           {"k", m.k},
            {"threshold", m.threshold},    {"mean", m.mean},               {"basis", m.basis},
            {"explained", m.explained},    {"eigenvalues", m.eigenvalues}};
}

PcaModel pca_from_json(const nlohmann::json& j) {
    PcaModel m;
    m.waveform_name = j.at("waveform").get<std::string>();
    m.length = j.at("length").get<std::size_t>();
    m.k = j.at("k").get<std::size_t>();
    m.threshold = j.at("threshold").get<double>();
    m.mean = j.at("mean").get<std::vector<double>>();
    m.basis = j.at("basis").get<std::vector<double>>();
    m.explained = j.at("explained").get<std::vector<double>>();
    m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    if (m.mean.size() != m.length || m.basis.size() != m.length * m.k || m.explained.size() != m.k ||
        m.eigenvalues.size() != m.k) {
        fail(ErrorCode::CorruptFile, "PCA model for " + m.waveform_name + " has inconsistent sizes");
    }
    return m;
}

const char* center_name(CenterMode c) { return c == CenterMode::PerTrial ? "per_trial" : "none"; }

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelBundle& bundle) {
    const auto& net = bundle.network;
    const auto shapes = cnn::weight_shapes(net.arch, net.output_dim);
    if (shapes.size() != net.layers.size()) {
        fail(ErrorCode::ShapeMismatch, "weight store does not match its architecture");
    }
    detail::Container c;
    auto& h = c.header;
    h["architecture"] = net.arch.describe();
    h["output_dim"] = net.output_dim;
    h["provenance"] = cnn::to_string(net.provenance);
    h["chain"] = net.chain;
    h["donor_id"] = net.donor_id;
    h["target_family"] = net.target_family;
    auto layers = nlohmann::json::array();
    std::size_t offset = 0;
    for (std::size_t j = 0; j < net.layers.size(); ++j) {
        const auto& l = net.layers[j];
        if (l.weight_shape != shapes[j]) {
            fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(l.layer_index) + " has the wrong shape");
        }
        layers.push_back({{"index", l.layer_index},
                          {"shape", l.weight_shape},
                          {"weights", l.weights.size()},
                          {"biases", l.biases.size()},
                          {"transferred", l.transferred},
                          {"offset", offset}});
        offset += (l.weights.size() + l.biases.size()) * sizeof(float);
        detail::append_floats(c.payload, l.weights);
        detail::append_floats(c.payload, l.biases);
    }
    h["layers"] = std::move(layers);
    h["input_scale"] = net.input_scale;
    h["input_mean"] = {{"count", net.input_mean.size()}, {"offset", offset}};
    detail::append_floats(c.payload, net.input_mean);
    auto pcas = nlohmann::json::array();
    for (const auto& p : bundle.pca) pcas.push_back(pca_to_json(p));
    h["pca"] = std::move(pcas);
    h["scaler"] = {{"center", center_name(bundle.scaler.center)},
                   {"axis_min", bundle.scaler.axis_min},
                   {"axis_max", bundle.scaler.axis_max}};
    h["target_scale"] = bundle.target_scale;
    h["info"] = bundle.info;
    return detail::encode_container(kMagic, kModelVersion, c);
}

ModelBundle decode_model(const std::vector<std::uint8_t>& bytes) {
    const auto c = detail::decode_container(kMagic, kModelVersion, bytes);
    ModelBundle b;
    try {
        const auto& h = c.header;
        auto& net = b.network;
        net.arch = cnn::ArchitectureSpec::parse(h.at("architecture").get<std::string>());
        net.output_dim = h.at("output_dim").get<std::size_t>();
        net.provenance = cnn::provenance_from_string(h.at("provenance").get<std::string>());
        net.chain = h.at("chain").get<std::vector<std::string>>();
        net.donor_id = h.at("donor_id").get<std::string>();
        net.target_family = h.at("target_family").get<std::string>();
        const auto shapes = cnn::weight_shapes(net.arch, net.output_dim);
        const auto& layers = h.at("layers");
        if (layers.size() != shapes.size()) {
            fail(ErrorCode::CorruptFile, "layer count does not match the architecture");
        }
        std::size_t expected_bytes = 0;
        for (std::size_t j = 0; j < layers.size(); ++j) {
            const auto& lj = layers[j];
            cnn::LayerWeights l;
            l.layer_index = lj.at("index").get<std::size_t>();
            l.weight_shape = lj.at("shape").get<std::vector<int>>();
            l.transferred = lj.at("transferred").get<bool>();
            if (l.weight_shape != shapes[j]) {
                fail(ErrorCode::CorruptFile, "layer " + std::to_string(l.layer_index) + " shape mismatch");
            }
            std::size_t count = 1;
            for (int d : l.weight_shape) count *= static_cast<std::size_t>(d);
            const auto nw = lj.at("weights").get<std::size_t>();
            const auto nb = lj.at("biases").get<std::size_t>();
            const auto bias_count = static_cast<std::size_t>(
                std::holds_alternative<cnn::Conv>(net.arch.layers[l.layer_index]) ? l.weight_shape[0]
                                                                                  : l.weight_shape[1]);
            if (nw != count || nb != bias_count) {
                fail(ErrorCode::CorruptFile, "layer " + std::to_string(l.layer_index) + " size mismatch");
            }
            const auto offset = lj.at("offset").get<std::size_t>();
            l.weights = detail::take_floats(c.payload, offset, nw);
            l.biases = detail::take_floats(c.payload, offset + nw * sizeof(float), nb);
            for (float v : l.weights) {
                if (!std::isfinite(v)) fail(ErrorCode::CorruptFile, "non-finite weight");
            }
            expected_bytes += (nw + nb) * sizeof(float);
            net.layers.push_back(std::move(l));
        }
        net.input_scale = h.at("input_scale").get<float>();
        const auto mean_count = h.at("input_mean").at("count").get<std::size_t>();
        if (mean_count != 0 && mean_count != net.arch.input.size()) {
            fail(ErrorCode::CorruptFile, "input mean does not match the input shape");
        }
        net.input_mean =
            detail::take_floats(c.payload, h.at("input_mean").at("offset").get<std::size_t>(), mean_count);
        expected_bytes += mean_count * sizeof(float);
        if (expected_bytes != c.payload.size()) {
            fail(ErrorCode::CorruptFile, "payload size does not match the declared layers");
        }
        for (const auto& p : h.at("pca")) b.pca.push_back(pca_from_json(p));
        const auto& s = h.at("scaler");
        b.scaler.center = s.at("center").get<std::string>() == "none" ? CenterMode::None : CenterMode::PerTrial;
        b.scaler.axis_min = s.at("axis_min").get<std::array<double, 3>>();
        b.scaler.axis_max = s.at("axis_max").get<std::array<double, 3>>();
        b.target_scale = h.at("target_scale").get<double>();
        b.info = h.at("info").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptFile, std::string("model header: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptFile) throw;
        fail(ErrorCode::CorruptFile, e.what());
    }
    return b;
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
    detail::write_bytes(path, encode_model(bundle));
}

ModelBundle load_model(const std::filesystem::path& path) { return decode_model(detail::read_bytes(path)); }

}  // namespace kjm

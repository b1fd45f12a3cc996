#include "kjm/dataset_io.hpp"

#include "container.hpp"

namespace kjm {

namespace {

constexpr std::string_view kMagic = "KTB1";

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
    const std::size_t n = ds.rows();
    if (ds.X.size() != n * kPredictorFeatures || ds.Y.size() != n * ds.response_width()) {
        fail(ErrorCode::ShapeMismatch, "dataset arrays do not match the row count");
    }
    detail::Container c;
    auto& h = c.header;
    h["kind"] = to_string(ds.kind);
    h["waveform_length"] = ds.waveform_length;
    h["waveform_names"] = ds.waveform_names;
    h["rows"] = n;
    h["arrays"] = nlohmann::json::array({
        {{"name", "X"}, {"dtype", "float32"}, {"shape", {n, kPredictorFeatures}}, {"offset", 0}},
        {{"name", "Y"},
         {"dtype", "float32"},
         {"shape", {n, ds.response_width()}},
         {"offset", ds.X.size() * sizeof(float)}},
    });
    auto rows = nlohmann::json::array();
    for (const auto& m : ds.meta) {
        rows.push_back({to_string(m.movement), std::string(1, to_char(m.stance_limb)), to_string(m.orientation),
                        m.source_id});
    }
    h["meta_columns"] = {"movement", "limb", "orientation", "source_id"};
    h["meta"] = std::move(rows);
    detail::append_floats(c.payload, ds.X);
    detail::append_floats(c.payload, ds.Y);
    return detail::encode_container(kMagic, kDatasetVersion, c);
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
    const auto c = detail::decode_container(kMagic, kDatasetVersion, bytes);
    Dataset ds;
    try {
        const auto& h = c.header;
        ds.kind = response_kind_from_string(h.at("kind").get<std::string>());
        ds.waveform_length = h.at("waveform_length").get<std::size_t>();
        ds.waveform_names = h.at("waveform_names").get<std::vector<std::string>>();
        const auto n = h.at("rows").get<std::size_t>();
        for (const auto& arr : h.at("arrays")) {
            const auto name = arr.at("name").get<std::string>();
            const auto shape = arr.at("shape").get<std::vector<std::size_t>>();
            const auto offset = arr.at("offset").get<std::size_t>();
            if (arr.at("dtype").get<std::string>() != "float32" || shape.size() != 2 || shape[0] != n) {
                fail(ErrorCode::CorruptFile, "array " + name + " has an unexpected layout");
            }
            if (name == "X") {
                if (shape[1] != kPredictorFeatures) {
                    fail(ErrorCode::CorruptFile, "X must have 3000 columns");
                }
                ds.X = detail::take_floats(c.payload, offset, n * shape[1]);
            } else if (name == "Y") {
                if (shape[1] != ds.response_width()) {
                    fail(ErrorCode::CorruptFile, "Y width does not match the waveform declaration");
                }
                ds.Y = detail::take_floats(c.payload, offset, n * shape[1]);
            }
        }
        for (const auto& row : h.at("meta")) {
            TrialMeta m;
            m.movement = movement_from_string(row.at(0).get<std::string>());
            m.stance_limb = limb_from_char(row.at(1).get<std::string>().at(0));
            m.orientation = orientation_from_string(row.at(2).get<std::string>());
            m.source_id = row.at(3).get<std::string>();
            ds.meta.push_back(std::move(m));
        }
        if (ds.meta.size() != n || ds.X.size() != n * kPredictorFeatures || ds.Y.size() != n * ds.response_width()) {
            fail(ErrorCode::CorruptFile, "row count disagrees with arrays");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptFile, std::string("dataset header: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptFile) {
            throw;
        }
        fail(ErrorCode::CorruptFile, e.what());
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    detail::write_bytes(path, encode_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(detail::read_bytes(path)); }

}  // namespace kjm

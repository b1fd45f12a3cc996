#include "kjm/c3d.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>

#include "kjm/error.hpp"

namespace kjm::c3d {

namespace {

constexpr std::size_t kBlock = 512;
constexpr std::uint8_t kKey = 0x50;
constexpr std::uint8_t kIntel = 84;

static_assert(std::endian::native == std::endian::little, "little-endian host required");

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
           });
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    [[nodiscard]] std::size_t size() const { return bytes_.size(); }

    template <typename T>
    T read(std::size_t offset) const {
        T value;
        std::memcpy(&value, bytes_.data() + offset, sizeof(T));
        return value;
    }

    [[nodiscard]] std::string text(std::size_t offset, std::size_t n) const {
        return {reinterpret_cast<const char*>(bytes_.data() + offset), n};
    }

    [[nodiscard]] std::span<const std::uint8_t> slice(std::size_t offset, std::size_t n) const {
        return bytes_.subspan(offset, n);
    }

private:
    std::span<const std::uint8_t> bytes_;
};

class Writer {
public:
    template <typename T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        out_.insert(out_.end(), p, p + sizeof(T));
    }
    void bytes(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }
    void text(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void pad_to_block() {
        const std::size_t rem = out_.size() % kBlock;
        if (rem != 0) {
            out_.resize(out_.size() + (kBlock - rem), 0);
        }
    }
    template <typename T>
    void patch(std::size_t offset, T value) {
        std::memcpy(out_.data() + offset, &value, sizeof(T));
    }
    [[nodiscard]] std::size_t size() const { return out_.size(); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

ParameterRecord make_record(std::string group, std::string name, ScalarType type, std::vector<int> dims,
                            const void* data, std::size_t byte_count) {
    ParameterRecord r;
    r.group_name = std::move(group);
    r.name = std::move(name);
    r.type = type;
    r.dimensions = std::move(dims);
    const auto* p = static_cast<const std::uint8_t*>(data);
    r.payload.assign(p, p + byte_count);
    return r;
}

std::vector<std::string> point_labels(const File& file) {
    const auto* labels = file.find("POINT", "LABELS");
    if (labels == nullptr) {
        fail(ErrorCode::MissingMarker, "POINT:LABELS parameter absent");
    }
    return labels->as_strings();
}

}  // namespace

std::size_t type_width(ScalarType type) {
    switch (type) {
        case ScalarType::Char:
        case ScalarType::Int8: return 1;
        case ScalarType::Int16: return 2;
        case ScalarType::Float32: return 4;
    }
    return 0;
}

std::size_t ParameterRecord::element_count() const {
    return std::accumulate(dimensions.begin(), dimensions.end(), std::size_t{1},
                           [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

std::vector<float> ParameterRecord::as_floats() const {
    std::vector<float> out(element_count());
    switch (type) {
        case ScalarType::Float32:
            std::memcpy(out.data(), payload.data(), out.size() * sizeof(float));
            break;
        case ScalarType::Int16:
            for (std::size_t i = 0; i < out.size(); ++i) {
                std::int16_t v;
                std::memcpy(&v, payload.data() + 2 * i, 2);
                out[i] = v;
            }
            break;
        case ScalarType::Int8:
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = static_cast<std::int8_t>(payload[i]);
            }
            break;
        case ScalarType::Char:
            fail(ErrorCode::MalformedParameter, group_name + ":" + name + " is a char parameter");
    }
    return out;
}

std::vector<std::int16_t> ParameterRecord::as_int16() const {
    std::vector<std::int16_t> out(element_count());
    switch (type) {
        case ScalarType::Int16:
            std::memcpy(out.data(), payload.data(), out.size() * 2);
            break;
        case ScalarType::Int8:
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = static_cast<std::int8_t>(payload[i]);
            }
            break;
        case ScalarType::Float32: {
            const auto f = as_floats();
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = static_cast<std::int16_t>(std::lround(f[i]));
            }
            break;
        }
        case ScalarType::Char:
            fail(ErrorCode::MalformedParameter, group_name + ":" + name + " is a char parameter");
    }
    return out;
}

std::vector<std::string> ParameterRecord::as_strings() const {
    if (type != ScalarType::Char) {
        fail(ErrorCode::MalformedParameter, group_name + ":" + name + " is not a char parameter");
    }
    std::vector<std::string> out;
    if (dimensions.empty()) {
        out.emplace_back(payload.begin(), payload.end());
    } else {
        const auto width = static_cast<std::size_t>(dimensions[0]);
        const std::size_t count = width == 0 ? 0 : payload.size() / width;
        for (std::size_t i = 0; i < count; ++i) {
            out.emplace_back(payload.begin() + static_cast<std::ptrdiff_t>(i * width),
                             payload.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
        }
    }
    for (auto& s : out) {
        while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) {
            s.pop_back();
        }
    }
    return out;
}

ParameterRecord ParameterRecord::floats(std::string group, std::string name, std::vector<int> dims,
                                        std::span<const float> values) {
    return make_record(std::move(group), std::move(name), ScalarType::Float32, std::move(dims), values.data(),
                       values.size_bytes());
}

ParameterRecord ParameterRecord::int16s(std::string group, std::string name, std::vector<int> dims,
                                        std::span<const std::int16_t> values) {
    return make_record(std::move(group), std::move(name), ScalarType::Int16, std::move(dims), values.data(),
                       values.size_bytes());
}

ParameterRecord ParameterRecord::strings(std::string group, std::string name, std::span<const std::string> values,
                                         int width) {
    std::size_t w = static_cast<std::size_t>(width);
    if (width <= 0) {
        w = 1;
        for (const auto& v : values) {
            w = std::max(w, v.size());
        }
    }
    std::vector<std::uint8_t> payload;
    for (const auto& v : values) {
        std::string padded = v.substr(0, w);
        padded.resize(w, ' ');
        payload.insert(payload.end(), padded.begin(), padded.end());
    }
    ParameterRecord r;
    r.group_name = std::move(group);
    r.name = std::move(name);
    r.type = ScalarType::Char;
    r.dimensions = {static_cast<int>(w), static_cast<int>(values.size())};
    r.payload = std::move(payload);
    return r;
}

std::size_t File::frame_count() const {
    return static_cast<std::size_t>(header.last_frame - header.first_frame + 1);
}

double File::analog_rate() const {
    return static_cast<double>(header.point_rate) * header.analog_samples_per_frame;
}

const ParameterRecord* File::find(std::string_view group, std::string_view name) const {
    for (const auto& p : parameters) {
        if (iequals(p.group_name, group) && iequals(p.name, name)) {
            return &p;
        }
    }
    return nullptr;
}

ParameterRecord* File::find(std::string_view group, std::string_view name) {
    return const_cast<ParameterRecord*>(std::as_const(*this).find(group, name));
}

void File::set(ParameterRecord record) {
    if (auto* existing = find(record.group_name, record.name)) {
        *existing = std::move(record);
    } else {
        parameters.push_back(std::move(record));
    }
}

void File::validate() const {
    if (!(header.point_rate > 0.0f) || !std::isfinite(header.point_rate)) {
        fail(ErrorCode::MalformedHeader, "point rate must be positive");
    }
    if (header.last_frame < header.first_frame || header.first_frame < 0) {
        fail(ErrorCode::MalformedHeader, "last frame precedes first frame");
    }
    if (header.point_count < 0 || header.analog_channels < 0 || header.analog_samples_per_frame < 0) {
        fail(ErrorCode::MalformedHeader, "negative counts");
    }
    if ((header.analog_channels == 0) != (header.analog_samples_per_frame == 0) && header.analog_channels != 0) {
        fail(ErrorCode::MalformedHeader, "analog channels without samples per frame");
    }
    const std::size_t frames = frame_count();
    if (point_frames.size() != frames * static_cast<std::size_t>(header.point_count)) {
        fail(ErrorCode::MalformedHeader, "point data does not match frames x points");
    }
    const std::size_t analog_per_frame =
        static_cast<std::size_t>(header.analog_channels) * static_cast<std::size_t>(header.analog_samples_per_frame);
    if (analog_frames.size() != frames * analog_per_frame) {
        fail(ErrorCode::MalformedHeader, "analog data does not match frames x subsamples x channels");
    }
    for (std::size_t i = 0; i < parameters.size(); ++i) {
        const auto& p = parameters[i];
        if (p.payload.size() != p.element_count() * type_width(p.type)) {
            fail(ErrorCode::MalformedParameter, p.group_name + ":" + p.name + " payload length mismatch");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (iequals(parameters[j].group_name, p.group_name) && iequals(parameters[j].name, p.name)) {
                fail(ErrorCode::MalformedParameter, "duplicate parameter " + p.group_name + ":" + p.name);
            }
        }
    }
}

File parse(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 * kBlock) {
        fail(ErrorCode::TruncatedFile, "fewer than two 512-byte blocks");
    }
    const Reader in(bytes);
    if (in.read<std::uint8_t>(1) != kKey) {
        fail(ErrorCode::MagicMismatch, "header byte 2 is not 0x50");
    }
    const std::size_t param_block = in.read<std::uint8_t>(0);
    if (param_block < 2) {
        fail(ErrorCode::MalformedHeader, "parameter section pointer before block 2");
    }
    const std::size_t param_start = (param_block - 1) * kBlock;
    if (param_start + 4 > bytes.size()) {
        fail(ErrorCode::TruncatedFile, "parameter section beyond end of file");
    }
    const std::uint8_t processor = in.read<std::uint8_t>(param_start + 3);
    if (processor != kIntel) {
        fail(ErrorCode::UnsupportedProcessor, "processor type " + std::to_string(processor) + " (only Intel, 84)");
    }
    const std::size_t param_blocks = in.read<std::uint8_t>(param_start + 2);
    const std::size_t param_end = std::min(bytes.size(), param_start + std::max<std::size_t>(param_blocks, 1) * kBlock);

    File file;
    auto& h = file.header;
    h.point_count = in.read<std::uint16_t>(2);
    const int analog_total = in.read<std::uint16_t>(4);
    h.first_frame = in.read<std::uint16_t>(6);
    h.last_frame = in.read<std::uint16_t>(8);
    const float raw_scale = in.read<float>(12);
    h.data_start_block = in.read<std::uint16_t>(16);
    h.analog_samples_per_frame = in.read<std::uint16_t>(18);
    h.point_rate = in.read<float>(20);
    h.point_scale = std::fabs(raw_scale);
    h.analog_channels = h.analog_samples_per_frame > 0 ? analog_total / h.analog_samples_per_frame : 0;
    if (h.analog_samples_per_frame > 0 && analog_total % h.analog_samples_per_frame != 0) {
        fail(ErrorCode::MalformedHeader, "analog total not divisible by samples per frame");
    }
    const bool float_storage = raw_scale < 0.0f;

    // parameter records
    std::map<int, std::string> groups;
    struct Pending {
        int group_id;
        ParameterRecord record;
    };
    std::vector<Pending> pending;
    std::size_t pos = param_start + 4;
    auto need = [&](std::size_t end) {
        if (end > param_end) {
            fail(ErrorCode::MalformedParameter, "record overruns the parameter section");
        }
    };
    while (true) {
        need(pos + 2);
        const auto name_len_raw = in.read<std::int8_t>(pos);
        if (name_len_raw == 0) {
            break;
        }
        const std::size_t name_len = static_cast<std::size_t>(std::abs(name_len_raw));
        const int group_id = in.read<std::int8_t>(pos + 1);
        need(pos + 2 + name_len + 2);
        std::string name = in.text(pos + 2, name_len);
        const std::size_t offset_pos = pos + 2 + name_len;
        const auto next_offset = in.read<std::int16_t>(offset_pos);
        std::size_t cursor = offset_pos + 2;
        if (group_id < 0) {
            need(cursor + 1);
            const std::size_t desc_len = in.read<std::uint8_t>(cursor);
            need(cursor + 1 + desc_len);
            groups[-group_id] = upper(name);
        } else if (group_id > 0) {
            need(cursor + 2);
            const auto type_code = in.read<std::int8_t>(cursor);
            if (type_code != -1 && type_code != 1 && type_code != 2 && type_code != 4) {
                fail(ErrorCode::MalformedParameter, "unknown parameter type " + std::to_string(type_code));
            }
            const std::size_t ndims = in.read<std::uint8_t>(cursor + 1);
            cursor += 2;
            need(cursor + ndims);
            ParameterRecord rec;
            rec.name = upper(name);
            rec.type = static_cast<ScalarType>(type_code);
            for (std::size_t d = 0; d < ndims; ++d) {
                rec.dimensions.push_back(in.read<std::uint8_t>(cursor + d));
            }
            cursor += ndims;
            const std::size_t payload_len = rec.element_count() * type_width(rec.type);
            need(cursor + payload_len + 1);
            const auto payload = in.slice(cursor, payload_len);
            rec.payload.assign(payload.begin(), payload.end());
            cursor += payload_len;
            const std::size_t desc_len = in.read<std::uint8_t>(cursor);
            need(cursor + 1 + desc_len);
            rec.description = in.text(cursor + 1, desc_len);
            pending.push_back({group_id, std::move(rec)});
        } else {
            fail(ErrorCode::MalformedParameter, "record with group id 0");
        }
        if (next_offset == 0) {
            break;
        }
        if (next_offset < 0) {
            fail(ErrorCode::MalformedParameter, "negative record offset");
        }
        pos = offset_pos + static_cast<std::size_t>(next_offset);
    }
    for (auto& p : pending) {
        const auto g = groups.find(p.group_id);
        if (g == groups.end()) {
            fail(ErrorCode::MalformedParameter, "parameter " + p.record.name + " references unknown group");
        }
        p.record.group_name = g->second;
        if (file.find(p.record.group_name, p.record.name) != nullptr) {
            fail(ErrorCode::MalformedParameter, "duplicate parameter " + p.record.group_name + ":" + p.record.name);
        }
        file.parameters.push_back(std::move(p.record));
    }

    if (!(h.point_rate > 0.0f) || !std::isfinite(h.point_rate)) {
        fail(ErrorCode::MalformedHeader, "point rate must be positive");
    }
    if (h.last_frame < h.first_frame) {
        fail(ErrorCode::MalformedHeader, "last frame precedes first frame");
    }
    if (h.data_start_block < 1) {
        fail(ErrorCode::MalformedHeader, "data start block is zero");
    }

    // data section
    const std::size_t frames = file.frame_count();
    const std::size_t width = float_storage ? 4 : 2;
    const auto points = static_cast<std::size_t>(h.point_count);
    const auto analog_per_frame = static_cast<std::size_t>(analog_total);
    const std::size_t frame_bytes = (4 * points + analog_per_frame) * width;
    const std::size_t data_start = (static_cast<std::size_t>(h.data_start_block) - 1) * kBlock;
    if (data_start + frames * frame_bytes > bytes.size() || data_start > bytes.size()) {
        fail(ErrorCode::TruncatedFile, "data section shorter than the header promises");
    }
    file.point_frames.resize(frames * points);
    file.analog_frames.resize(frames * analog_per_frame);
    const float scale = h.point_scale;
    std::size_t cursor = data_start;
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t p = 0; p < points; ++p) {
            auto& s = file.point_frames[f * points + p];
            if (float_storage) {
                s.x = in.read<float>(cursor);
                s.y = in.read<float>(cursor + 4);
                s.z = in.read<float>(cursor + 8);
                s.residual = in.read<float>(cursor + 12);
                cursor += 16;
            } else {
                s.x = static_cast<float>(in.read<std::int16_t>(cursor)) * scale;
                s.y = static_cast<float>(in.read<std::int16_t>(cursor + 2)) * scale;
                s.z = static_cast<float>(in.read<std::int16_t>(cursor + 4)) * scale;
                const auto word = in.read<std::int16_t>(cursor + 6);
                s.residual = word < 0 ? -1.0f : static_cast<float>(word & 0xFF) * scale;
                cursor += 8;
            }
        }
        for (std::size_t a = 0; a < analog_per_frame; ++a) {
            file.analog_frames[f * analog_per_frame + a] =
                float_storage ? in.read<float>(cursor) : static_cast<float>(in.read<std::int16_t>(cursor));
            cursor += width;
        }
    }
    return file;
}

std::vector<std::uint8_t> write(const File& file) {
    file.validate();
    const auto& h = file.header;
    for (const auto& s : file.point_frames) {
        if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.z) || !std::isfinite(s.residual)) {
            fail(ErrorCode::UnrepresentableValue, "non-finite point sample");
        }
    }
    for (float v : file.analog_frames) {
        if (!std::isfinite(v)) {
            fail(ErrorCode::UnrepresentableValue, "non-finite analog sample");
        }
    }
    if (h.last_frame > 0xFFFF || h.point_count > 0xFFFF ||
        h.analog_channels * h.analog_samples_per_frame > 0xFFFF) {
        fail(ErrorCode::UnrepresentableValue, "header count exceeds 16 bits");
    }

    // group ids follow first appearance
    std::vector<std::string> group_order;
    for (const auto& p : file.parameters) {
        const auto name = upper(p.group_name);
        if (std::find(group_order.begin(), group_order.end(), name) == group_order.end()) {
            group_order.push_back(name);
        }
    }
    auto group_id = [&](const std::string& g) {
        const auto it = std::find(group_order.begin(), group_order.end(), upper(g));
        return static_cast<int>(std::distance(group_order.begin(), it)) + 1;
    };

    Writer params;
    std::size_t last_offset_pos = 0;
    auto begin_record = [&](std::string_view name, int gid) {
        if (name.empty() || name.size() > 127) {
            fail(ErrorCode::UnrepresentableValue, "parameter name length out of range");
        }
        params.put<std::int8_t>(static_cast<std::int8_t>(name.size()));
        params.put<std::int8_t>(static_cast<std::int8_t>(gid));
        params.text(upper(name));
        last_offset_pos = params.size();
        params.put<std::int16_t>(0);
    };
    auto end_record = [&]() {
        const std::size_t next = params.size();
        const std::size_t offset = next - last_offset_pos;
        if (offset > 0x7FFF) {
            fail(ErrorCode::UnrepresentableValue, "parameter record too large");
        }
        params.patch<std::int16_t>(last_offset_pos, static_cast<std::int16_t>(offset));
    };
    if (group_order.size() > 127) {
        fail(ErrorCode::UnrepresentableValue, "too many parameter groups");
    }
    for (std::size_t g = 0; g < group_order.size(); ++g) {
        begin_record(group_order[g], -static_cast<int>(g + 1));
        params.put<std::uint8_t>(0);
        end_record();
    }

    // the data start parameter is rewritten only if the layout forces a move
    std::vector<ParameterRecord> records = file.parameters;
    for (const auto& p : records) {
        if (p.dimensions.size() > 255) {
            fail(ErrorCode::UnrepresentableValue, "too many dimensions");
        }
        for (int d : p.dimensions) {
            if (d < 0 || d > 255) {
                fail(ErrorCode::UnrepresentableValue, p.group_name + ":" + p.name + " dimension exceeds 255");
            }
        }
        if (p.description.size() > 255) {
            fail(ErrorCode::UnrepresentableValue, "description too long");
        }
    }
    auto emit_params = [&](const std::vector<ParameterRecord>& recs) {
        for (const auto& p : recs) {
            begin_record(p.name, group_id(p.group_name));
            params.put<std::int8_t>(static_cast<std::int8_t>(p.type));
            params.put<std::uint8_t>(static_cast<std::uint8_t>(p.dimensions.size()));
            for (int d : p.dimensions) {
                params.put<std::uint8_t>(static_cast<std::uint8_t>(d));
            }
            params.bytes(p.payload);
            params.put<std::uint8_t>(static_cast<std::uint8_t>(p.description.size()));
            params.text(p.description);
            end_record();
        }
        // the final record terminates the chain
        if (params.size() > 0) {
            params.patch<std::int16_t>(last_offset_pos, 0);
        }
    };
    const Writer group_part = params;
    emit_params(records);
    std::size_t param_blocks = (4 + params.size() + kBlock - 1) / kBlock;
    int data_start = h.data_start_block;
    if (data_start < static_cast<int>(2 + param_blocks)) {
        data_start = static_cast<int>(2 + param_blocks);
        if (auto it = std::find_if(records.begin(), records.end(),
                                   [](const ParameterRecord& p) {
                                       return iequals(p.group_name, "POINT") && iequals(p.name, "DATA_START");
                                   });
            it != records.end()) {
            const std::int16_t v = static_cast<std::int16_t>(data_start);
            *it = ParameterRecord::int16s(it->group_name, it->name, it->dimensions, std::span(&v, 1));
        }
        params = group_part;
        emit_params(records);
        param_blocks = (4 + params.size() + kBlock - 1) / kBlock;
        data_start = std::max(data_start, static_cast<int>(2 + param_blocks));
    }
    if (param_blocks > 255) {
        fail(ErrorCode::UnrepresentableValue, "parameter section exceeds 255 blocks");
    }

    Writer out;
    out.put<std::uint8_t>(2);
    out.put<std::uint8_t>(kKey);
    out.put<std::uint16_t>(static_cast<std::uint16_t>(h.point_count));
    out.put<std::uint16_t>(static_cast<std::uint16_t>(h.analog_channels * h.analog_samples_per_frame));
    out.put<std::uint16_t>(static_cast<std::uint16_t>(h.first_frame));
    out.put<std::uint16_t>(static_cast<std::uint16_t>(h.last_frame));
    out.put<std::uint16_t>(0);
    out.put<float>(-(h.point_scale > 0.0f ? h.point_scale : 1.0f));
    out.put<std::uint16_t>(static_cast<std::uint16_t>(data_start));
    out.put<std::uint16_t>(static_cast<std::uint16_t>(h.analog_samples_per_frame));
    out.put<float>(h.point_rate);
    out.pad_to_block();

    out.put<std::uint8_t>(1);
    out.put<std::uint8_t>(kKey);
    out.put<std::uint8_t>(static_cast<std::uint8_t>(param_blocks));
    out.put<std::uint8_t>(kIntel);
    const auto param_bytes = params.take();
    out.bytes(param_bytes);
    out.pad_to_block();
    while (out.size() < (static_cast<std::size_t>(data_start) - 1) * kBlock) {
        out.put<std::uint8_t>(0);
    }

    const std::size_t frames = file.frame_count();
    const auto points = static_cast<std::size_t>(h.point_count);
    const std::size_t analog_per_frame =
        static_cast<std::size_t>(h.analog_channels) * static_cast<std::size_t>(h.analog_samples_per_frame);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t p = 0; p < points; ++p) {
            const auto& s = file.point_frames[f * points + p];
            out.put<float>(s.x);
            out.put<float>(s.y);
            out.put<float>(s.z);
            out.put<float>(s.residual);
        }
        for (std::size_t a = 0; a < analog_per_frame; ++a) {
            out.put<float>(file.analog_frames[f * analog_per_frame + a]);
        }
    }
    out.pad_to_block();
    return out.take();
}

File read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(bytes);
}

void write_file(const File& file, const std::filesystem::path& path) {
    const auto bytes = write(file);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<double> calibrated_analog(const File& file) {
    const auto channels = static_cast<std::size_t>(file.header.analog_channels);
    std::vector<double> scale(channels, 1.0);
    std::vector<double> offset(channels, 0.0);
    double gen_scale = 1.0;
    if (const auto* p = file.find("ANALOG", "SCALE")) {
        const auto v = p->as_floats();
        for (std::size_t c = 0; c < std::min(channels, v.size()); ++c) {
            scale[c] = v[c];
        }
    }
    if (const auto* p = file.find("ANALOG", "OFFSET")) {
        const auto v = p->as_int16();
        for (std::size_t c = 0; c < std::min(channels, v.size()); ++c) {
            offset[c] = v[c];
        }
    }
    if (const auto* p = file.find("ANALOG", "GEN_SCALE")) {
        const auto v = p->as_floats();
        if (!v.empty()) {
            gen_scale = v[0];
        }
    }
    std::vector<double> out(file.analog_frames.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t c = channels == 0 ? 0 : i % channels;
        out[i] = (static_cast<double>(file.analog_frames[i]) - offset[c]) * scale[c] * gen_scale;
    }
    return out;
}

std::string normalize_label(std::string_view label) {
    const auto first = label.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = label.find_last_not_of(" \t\r\n");
    return upper(label.substr(first, last - first + 1));
}

std::optional<std::size_t> find_point(const File& file, std::string_view label, const LabelMatch& match) {
    const auto labels = point_labels(file);
    const std::string want = normalize_label(label);
    const std::string prefixed = normalize_label(match.prefix + std::string(label));
    const auto count = std::min(labels.size(), static_cast<std::size_t>(file.header.point_count));
    for (std::size_t i = 0; i < count; ++i) {
        const std::string have = normalize_label(labels[i]);
        if (have == want || (!match.prefix.empty() && have == prefixed)) {
            return i;
        }
        // "Subject:Label" naming
        const auto colon = have.rfind(':');
        if (match.prefix.empty() && colon != std::string::npos && have.substr(colon + 1) == want) {
            return i;
        }
    }
    return std::nullopt;
}

std::vector<Vec3> extract_point_series(const File& file, std::string_view label, const LabelMatch& match) {
    const auto index = find_point(file, label, match);
    if (!index) {
        fail(ErrorCode::MissingMarker, "point '" + std::string(label) + "' not found");
    }
    std::vector<Vec3> out(file.frame_count());
    for (std::size_t f = 0; f < out.size(); ++f) {
        const auto& s = file.point(f, *index);
        if (s.residual < 0.0f || !std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.z)) {
            fail(ErrorCode::GappedTrajectory,
                 "point '" + std::string(label) + "' invalid at frame " + std::to_string(f));
        }
        out[f] = {s.x, s.y, s.z};
    }
    return out;
}

MarkerTrajectorySet extract_markers(const File& file, const LabelMatch& match) {
    auto set = MarkerTrajectorySet::with_frames(file.frame_count(), file.header.point_rate);
    for (std::size_t m = 0; m < kMarkerCount; ++m) {
        const auto series = extract_point_series(file, kCanonicalMarkers[m], match);
        for (std::size_t f = 0; f < series.size(); ++f) {
            set.at(f, m) = series[f];
        }
    }
    return set;
}

ForcePlateRecord extract_force_plate(const File& file, std::size_t plate_index) {
    const auto* used = file.find("FORCE_PLATFORM", "USED");
    const auto* channel = file.find("FORCE_PLATFORM", "CHANNEL");
    const auto* corners = file.find("FORCE_PLATFORM", "CORNERS");
    if (used == nullptr || channel == nullptr || corners == nullptr) {
        fail(ErrorCode::MissingPlate, "FORCE_PLATFORM parameters absent");
    }
    const auto used_v = used->as_int16();
    const std::size_t plate_count = used_v.empty() ? 0 : static_cast<std::size_t>(std::max<int>(used_v[0], 0));
    if (plate_index >= plate_count) {
        fail(ErrorCode::MissingPlate, "plate " + std::to_string(plate_index) + " of " + std::to_string(plate_count));
    }
    if (channel->dimensions.size() != 2 || static_cast<std::size_t>(channel->dimensions[1]) <= plate_index) {
        fail(ErrorCode::MissingPlate, "FORCE_PLATFORM:CHANNEL has no column for the plate");
    }
    if (channel->dimensions[0] != 6) {
        fail(ErrorCode::ChannelCountMismatch,
             std::to_string(channel->dimensions[0]) + " channels mapped per plate, expected 6");
    }
    if (corners->dimensions.size() != 3 || corners->dimensions[0] != 3 || corners->dimensions[1] != 4 ||
        static_cast<std::size_t>(corners->dimensions[2]) <= plate_index) {
        fail(ErrorCode::MissingPlate, "FORCE_PLATFORM:CORNERS has no block for the plate");
    }
    const auto map = channel->as_int16();
    const auto corner_v = corners->as_floats();

    ForcePlateRecord plate;
    plate.rate = file.analog_rate();
    for (std::size_t c = 0; c < 4; ++c) {
        const std::size_t base = plate_index * 12 + c * 3;
        plate.corners[c] = {corner_v[base], corner_v[base + 1]};
    }
    if (!is_simple_quadrilateral(plate.corners)) {
        fail(ErrorCode::InvalidPlateGeometry, "plate corners do not form a simple quadrilateral");
    }
    const auto channels = static_cast<std::size_t>(file.header.analog_channels);
    std::array<std::size_t, 6> columns{};
    for (std::size_t k = 0; k < 6; ++k) {
        const int one_based = map[plate_index * 6 + k];
        if (one_based < 1 || static_cast<std::size_t>(one_based) > channels) {
            fail(ErrorCode::ChannelCountMismatch, "plate channel " + std::to_string(one_based) + " out of range");
        }
        columns[k] = static_cast<std::size_t>(one_based - 1);
    }
    const auto calibrated = calibrated_analog(file);
    const std::size_t samples = channels == 0 ? 0 : calibrated.size() / channels;
    plate.channels.resize(samples * 6);
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t k = 0; k < 6; ++k) {
            plate.channels[s * 6 + k] = calibrated[s * channels + columns[k]];
        }
    }
    return plate;
}

}  // namespace kjm::c3d

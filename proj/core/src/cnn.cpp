#include "kjm/cnn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "kjm/rng.hpp"

namespace kjm::cnn {

namespace {

constexpr double kPixelCentre = 127.5;

int conv_extent(int in, int kernel, int stride, int pad) {
    const int span = in + 2 * pad - kernel;
    if (span < 0 || stride <= 0) {
        return 0;
    }
    return span / stride + 1;
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool has_params(const LayerSpec& layer) { return !std::holds_alternative<MaxPool>(layer); }

int parse_int(std::string_view text, std::size_t& pos) {
    int value = 0;
    const auto* begin = text.data() + pos;
    const auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), value);
    if (ec != std::errc{} || ptr == begin) {
        fail(ErrorCode::IncompatibleArchitecture, "expected a number in '" + std::string(text) + "'");
    }
    pos += static_cast<std::size_t>(ptr - begin);
    return value;
}

bool consume(std::string_view text, std::size_t& pos, char c) {
    if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
    }
    return false;
}

std::string trim_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

LayerSpec parse_layer(std::string_view tok) {
    std::size_t pos = 0;
    auto starts = [&](std::string_view prefix) {
        if (tok.substr(0, prefix.size()) == prefix) {
            pos = prefix.size();
            return true;
        }
        return false;
    };
    auto finish = [&](LayerSpec layer) {
        if (pos != tok.size()) {
            fail(ErrorCode::IncompatibleArchitecture, "trailing characters in layer '" + std::string(tok) + "'");
        }
        return layer;
    };
    if (starts("conv")) {
        Conv c;
        c.out_channels = parse_int(tok, pos);
        if (consume(tok, pos, 'k')) c.kernel = parse_int(tok, pos);
        if (consume(tok, pos, 's')) c.stride = parse_int(tok, pos);
        if (consume(tok, pos, 'p')) c.pad = parse_int(tok, pos);
        if (consume(tok, pos, 'n')) c.relu = false;
        return finish(c);
    }
    if (starts("pool")) {
        MaxPool p;
        p.kernel = parse_int(tok, pos);
        if (consume(tok, pos, 's')) p.stride = parse_int(tok, pos);
        return finish(p);
    }
    if (starts("fc")) {
        FullyConnected f;
        f.out_features = parse_int(tok, pos);
        if (consume(tok, pos, 'd')) {
            const std::string rest(tok.substr(pos));
            std::size_t used = 0;
            try {
                f.dropout = std::stod(rest, &used);
            } catch (const std::exception&) {
                fail(ErrorCode::IncompatibleArchitecture, "bad dropout in '" + std::string(tok) + "'");
            }
            pos += used;
        }
        if (consume(tok, pos, 'n')) f.relu = false;
        return finish(f);
    }
    if (starts("out")) {
        Output o;
        if (pos < tok.size()) o.out_features = parse_int(tok, pos);
        return finish(o);
    }
    fail(ErrorCode::IncompatibleArchitecture, "unknown layer '" + std::string(tok) + "'");
}

// Parameters in the compute precision. Conv weights are (OC, IC*K*K) row-major,
// fully connected weights (in, out) row-major.
template <typename T>
struct Params {
    std::vector<std::vector<T>> w;
    std::vector<std::vector<T>> b;
};

template <typename T>
Params<T> params_from(const WeightStore& model) {
    Params<T> p;
    for (const auto& layer : model.layers) {
        p.w.emplace_back(layer.weights.begin(), layer.weights.end());
        p.b.emplace_back(layer.biases.begin(), layer.biases.end());
    }
    return p;
}

template <typename T>
class Net {
public:
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Map = Eigen::Map<Mat>;
    using CMap = Eigen::Map<const Mat>;

    Net(const ArchitectureSpec& arch, std::size_t output_dim, const std::vector<float>& input_mean, float input_scale)
        : arch_(arch), shapes_(chain_shapes(arch, output_dim)), input_mean_(input_mean), input_scale_(input_scale) {
        if (!input_mean_.empty() && input_mean_.size() != arch.input.size()) {
            fail(ErrorCode::ShapeMismatch, "input mean does not match the network input shape");
        }
        int slot = 0;
        for (const auto& layer : arch.layers) {
            slot_.push_back(has_params(layer) ? slot++ : -1);
        }
    }

    [[nodiscard]] std::size_t output_size() const { return shapes_.back().size(); }
    [[nodiscard]] const Shape& in_shape(std::size_t l) const { return l == 0 ? arch_.input : shapes_[l - 1]; }

    /// `dropout_seeds` is empty for inference, otherwise one seed per sample.
    void forward(const Params<T>& p, const float* const* inputs, std::size_t n,
                 std::span<const std::uint64_t> dropout_seeds) {
        n_ = n;
        const std::size_t in_size = arch_.input.size();
        act_.resize(arch_.layers.size() + 1);
        act_[0].resize(n * in_size);
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t j = 0; j < in_size; ++j) {
                const double centre = input_mean_.empty() ? kPixelCentre : static_cast<double>(input_mean_[j]);
                act_[0][s * in_size + j] =
                    static_cast<T>((static_cast<double>(inputs[s][j]) - centre) * static_cast<double>(input_scale_));
            }
        }
        argmax_.resize(arch_.layers.size());
        masks_.resize(arch_.layers.size());
        for (std::size_t l = 0; l < arch_.layers.size(); ++l) {
            const Shape& si = in_shape(l);
            const Shape& so = shapes_[l];
            const auto& in = act_[l];
            auto& out = act_[l + 1];
            out.assign(n * so.size(), T(0));
            std::visit(Overloaded{
                           [&](const Conv& c) { conv_forward(p, l, c, si, so, in, out); },
                           [&](const MaxPool& m) { pool_forward(l, m, si, so, in, out); },
                           [&](const FullyConnected& f) {
                               dense_forward(p, l, si.size(), so.size(), in, out);
                               if (f.relu) relu(out);
                               if (f.dropout > 0.0 && !dropout_seeds.empty()) {
                                   apply_dropout(l, f.dropout, so.size(), dropout_seeds, out);
                               } else {
                                   masks_[l].clear();
                               }
                           },
                           [&](const Output&) { dense_forward(p, l, si.size(), so.size(), in, out); },
                       },
                       arch_.layers[l]);
        }
    }

    [[nodiscard]] const std::vector<T>& output() const { return act_.back(); }
    [[nodiscard]] const std::vector<T>& layer_output(std::size_t l) const { return act_[l + 1]; }

    /// `grad_out` is d loss / d output, n x output_size. Gradients are written to `gw`/`gb`.
    void backward(const Params<T>& p, std::vector<T> grad_out, Params<T>& grads) {
        grads.w.resize(p.w.size());
        grads.b.resize(p.b.size());
        for (std::size_t k = 0; k < p.w.size(); ++k) {
            grads.w[k].assign(p.w[k].size(), T(0));
            grads.b[k].assign(p.b[k].size(), T(0));
        }
        std::vector<T> g = std::move(grad_out);
        for (std::size_t l = arch_.layers.size(); l-- > 0;) {
            const Shape& si = in_shape(l);
            const Shape& so = shapes_[l];
            const bool need_input_grad = l > 0;
            std::vector<T> gin;
            if (need_input_grad) {
                gin.assign(n_ * si.size(), T(0));
            }
            std::visit(Overloaded{
                           [&](const Conv& c) {
                               if (c.relu) relu_mask(act_[l + 1], g);
                               conv_backward(p, grads, l, c, si, so, g, need_input_grad ? &gin : nullptr);
                           },
                           [&](const MaxPool&) {
                               if (need_input_grad) pool_backward(l, si, so, g, gin);
                           },
                           [&](const FullyConnected& f) {
                               if (!masks_[l].empty()) {
                                   for (std::size_t i = 0; i < g.size(); ++i) g[i] *= masks_[l][i];
                               }
                               if (f.relu) relu_mask(act_[l + 1], g);
                               dense_backward(p, grads, l, si.size(), so.size(), g, need_input_grad ? &gin : nullptr);
                           },
                           [&](const Output&) {
                               dense_backward(p, grads, l, si.size(), so.size(), g, need_input_grad ? &gin : nullptr);
                           },
                       },
                       arch_.layers[l]);
            g = std::move(gin);
        }
    }

private:
    static void relu(std::vector<T>& v) {
        for (auto& x : v) {
            if (x < T(0)) x = T(0);
        }
    }

    static void relu_mask(const std::vector<T>& out, std::vector<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!(out[i] > T(0))) g[i] = T(0);
        }
    }

    void im2col(const T* x, const Conv& c, const Shape& si, const Shape& so, std::vector<T>& col) const {
        const int k = c.kernel;
        const std::size_t positions = static_cast<std::size_t>(so.height) * static_cast<std::size_t>(so.width);
        col.assign(static_cast<std::size_t>(si.channels * k * k) * positions, T(0));
        std::size_t row = 0;
        for (int ch = 0; ch < si.channels; ++ch) {
            const T* plane = x + static_cast<std::size_t>(ch) * si.height * si.width;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx, ++row) {
                    T* dst = col.data() + row * positions;
                    for (int oy = 0; oy < so.height; ++oy) {
                        const int iy = oy * c.stride + ky - c.pad;
                        if (iy < 0 || iy >= si.height) continue;
                        const T* src = plane + static_cast<std::size_t>(iy) * si.width;
                        T* d = dst + static_cast<std::size_t>(oy) * so.width;
                        for (int ox = 0; ox < so.width; ++ox) {
                            const int ix = ox * c.stride + kx - c.pad;
                            if (ix >= 0 && ix < si.width) d[ox] = src[ix];
                        }
                    }
                }
            }
        }
    }

    void col2im(const std::vector<T>& col, const Conv& c, const Shape& si, const Shape& so, T* x) const {
        const int k = c.kernel;
        const std::size_t positions = static_cast<std::size_t>(so.height) * static_cast<std::size_t>(so.width);
        std::size_t row = 0;
        for (int ch = 0; ch < si.channels; ++ch) {
            T* plane = x + static_cast<std::size_t>(ch) * si.height * si.width;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx, ++row) {
                    const T* src = col.data() + row * positions;
                    for (int oy = 0; oy < so.height; ++oy) {
                        const int iy = oy * c.stride + ky - c.pad;
                        if (iy < 0 || iy >= si.height) continue;
                        T* d = plane + static_cast<std::size_t>(iy) * si.width;
                        const T* s = src + static_cast<std::size_t>(oy) * so.width;
                        for (int ox = 0; ox < so.width; ++ox) {
                            const int ix = ox * c.stride + kx - c.pad;
                            if (ix >= 0 && ix < si.width) d[ix] += s[ox];
                        }
                    }
                }
            }
        }
    }

    void conv_forward(const Params<T>& p, std::size_t l, const Conv& c, const Shape& si, const Shape& so,
                      const std::vector<T>& in, std::vector<T>& out) {
        const int slot = slot_[l];
        const auto ckk = static_cast<Eigen::Index>(si.channels * c.kernel * c.kernel);
        const auto positions = static_cast<Eigen::Index>(so.height) * so.width;
        CMap w(p.w[slot].data(), c.out_channels, ckk);
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(p.b[slot].data(), c.out_channels);
        for (std::size_t s = 0; s < n_; ++s) {
            im2col(in.data() + s * si.size(), c, si, so, col_);
            CMap col(col_.data(), ckk, positions);
            Map y(out.data() + s * so.size(), c.out_channels, positions);
            y.noalias() = w * col;
            y.colwise() += b;
        }
        if (c.relu) relu(out);
    }

    void conv_backward(const Params<T>& p, Params<T>& grads, std::size_t l, const Conv& c, const Shape& si,
                       const Shape& so, const std::vector<T>& g, std::vector<T>* gin) {
        const int slot = slot_[l];
        const auto ckk = static_cast<Eigen::Index>(si.channels * c.kernel * c.kernel);
        const auto positions = static_cast<Eigen::Index>(so.height) * so.width;
        CMap w(p.w[slot].data(), c.out_channels, ckk);
        Map gw(grads.w[slot].data(), c.out_channels, ckk);
        auto& gb = grads.b[slot];
        std::vector<T> dcol;
        for (std::size_t s = 0; s < n_; ++s) {
            im2col(act_[l].data() + s * si.size(), c, si, so, col_);
            CMap col(col_.data(), ckk, positions);
            CMap gs(g.data() + s * so.size(), c.out_channels, positions);
            gw.noalias() += gs * col.transpose();
            // plain loops: Eigen's vectorized reductions sum in an alignment-dependent order
            const T* gp = g.data() + s * so.size();
            for (int oc = 0; oc < c.out_channels; ++oc) {
                T acc = 0;
                for (Eigen::Index i = 0; i < positions; ++i) acc += gp[oc * positions + i];
                gb[static_cast<std::size_t>(oc)] += acc;
            }
            if (gin != nullptr) {
                dcol.resize(static_cast<std::size_t>(ckk * positions));
                Map dc(dcol.data(), ckk, positions);
                dc.noalias() = w.transpose() * gs;
                col2im(dcol, c, si, so, gin->data() + s * si.size());
            }
        }
    }

    void pool_forward(std::size_t l, const MaxPool& m, const Shape& si, const Shape& so, const std::vector<T>& in,
                      std::vector<T>& out) {
        auto& arg = argmax_[l];
        arg.assign(n_ * so.size(), 0);
        for (std::size_t s = 0; s < n_; ++s) {
            for (int ch = 0; ch < so.channels; ++ch) {
                const std::size_t plane = s * si.size() + static_cast<std::size_t>(ch) * si.height * si.width;
                for (int oy = 0; oy < so.height; ++oy) {
                    for (int ox = 0; ox < so.width; ++ox) {
                        std::size_t best = plane + static_cast<std::size_t>(oy * m.stride) * si.width + ox * m.stride;
                        T best_v = in[best];
                        for (int ky = 0; ky < m.kernel; ++ky) {
                            for (int kx = 0; kx < m.kernel; ++kx) {
                                const std::size_t idx = plane +
                                                        static_cast<std::size_t>(oy * m.stride + ky) * si.width +
                                                        static_cast<std::size_t>(ox * m.stride + kx);
                                if (in[idx] > best_v) {
                                    best_v = in[idx];
                                    best = idx;
                                }
                            }
                        }
                        const std::size_t o = s * so.size() +
                                              (static_cast<std::size_t>(ch) * so.height + oy) * so.width + ox;
                        out[o] = best_v;
                        arg[o] = best;
                    }
                }
            }
        }
    }

    void pool_backward(std::size_t l, const Shape&, const Shape&, const std::vector<T>& g, std::vector<T>& gin) {
        const auto& arg = argmax_[l];
        for (std::size_t o = 0; o < g.size(); ++o) {
            gin[arg[o]] += g[o];
        }
    }

    void dense_forward(const Params<T>& p, std::size_t l, std::size_t in_size, std::size_t out_size,
                       const std::vector<T>& in, std::vector<T>& out) {
        const int slot = slot_[l];
        const auto n = static_cast<Eigen::Index>(n_);
        const auto ni = static_cast<Eigen::Index>(in_size);
        const auto no = static_cast<Eigen::Index>(out_size);
        CMap x(in.data(), n, ni);
        CMap w(p.w[slot].data(), ni, no);
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(p.b[slot].data(), no);
        Map y(out.data(), n, no);
        y.noalias() = x * w;
        y.rowwise() += b;
    }

    void dense_backward(const Params<T>& p, Params<T>& grads, std::size_t l, std::size_t in_size,
                        std::size_t out_size, const std::vector<T>& g, std::vector<T>* gin) {
        const int slot = slot_[l];
        const auto n = static_cast<Eigen::Index>(n_);
        const auto ni = static_cast<Eigen::Index>(in_size);
        const auto no = static_cast<Eigen::Index>(out_size);
        CMap x(act_[l].data(), n, ni);
        CMap w(p.w[slot].data(), ni, no);
        CMap gm(g.data(), n, no);
        Map gw(grads.w[slot].data(), ni, no);
        gw.noalias() = x.transpose() * gm;
        auto& gb = grads.b[slot];
        std::fill(gb.begin(), gb.end(), T(0));
        for (std::size_t s = 0; s < n_; ++s) {
            for (std::size_t o = 0; o < out_size; ++o) gb[o] += g[s * out_size + o];
        }
        if (gin != nullptr) {
            Map gi(gin->data(), n, ni);
            gi.noalias() = gm * w.transpose();
        }
    }

    void apply_dropout(std::size_t l, double rate, std::size_t width, std::span<const std::uint64_t> seeds,
                       std::vector<T>& out) {
        auto& mask = masks_[l];
        mask.assign(out.size(), T(0));
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
        for (std::size_t s = 0; s < n_; ++s) {
            Rng rng(derive_seed(seeds[s], l));
            for (std::size_t j = 0; j < width; ++j) {
                const std::size_t i = s * width + j;
                mask[i] = rng.uniform() < rate ? T(0) : keep_scale;
                out[i] *= mask[i];
            }
        }
    }

    const ArchitectureSpec& arch_;
    std::vector<Shape> shapes_;
    const std::vector<float>& input_mean_;
    float input_scale_;
    std::vector<int> slot_;
    std::size_t n_ = 0;
    std::vector<std::vector<T>> act_;
    std::vector<std::vector<std::size_t>> argmax_;
    std::vector<std::vector<T>> masks_;
    std::vector<T> col_;
};

void check_inputs(const WeightStore& model, std::span<const Tensor> inputs, std::span<const double> targets) {
    if (inputs.empty()) {
        fail(ErrorCode::EmptyDataset, "no training inputs");
    }
    const std::size_t in_size = model.arch.input.size();
    for (const auto& x : inputs) {
        if (x.size() != in_size) {
            fail(ErrorCode::ShapeMismatch,
                 "input has " + std::to_string(x.size()) + " values, network expects " + std::to_string(in_size));
        }
    }
    if (targets.size() != inputs.size() * model.output_dim) {
        fail(ErrorCode::ShapeMismatch, "targets must be n x " + std::to_string(model.output_dim));
    }
}

template <typename T>
double mean_loss_and_grad(const std::vector<T>& out, std::span<const double> targets, std::size_t n, std::size_t k,
                          std::vector<T>* grad) {
    double loss = 0.0;
    if (grad != nullptr) grad->assign(n * k, T(0));
    for (std::size_t s = 0; s < n; ++s) {
        const std::span<const double> t = targets.subspan(s * k, k);
        std::vector<double> pred(k);
        for (std::size_t j = 0; j < k; ++j) pred[j] = static_cast<double>(out[s * k + j]);
        const LossResult r = euclidean_loss(pred, t);
        loss += r.loss;
        if (grad != nullptr) {
            for (std::size_t j = 0; j < k; ++j) (*grad)[s * k + j] = static_cast<T>(r.grad[j] / static_cast<double>(n));
        }
    }
    return loss / static_cast<double>(n);
}

std::vector<const float*> pointers(std::span<const Tensor> inputs) {
    std::vector<const float*> ptrs;
    ptrs.reserve(inputs.size());
    for (const auto& x : inputs) ptrs.push_back(x.data());
    return ptrs;
}

}  // namespace

ArchitectureSpec ArchitectureSpec::desk() {
    ArchitectureSpec a;
    a.layers = {Conv{16, 7, 4, 0, true}, MaxPool{3, 2}, Conv{32, 5, 1, 2, true}, MaxPool{3, 2},
                FullyConnected{256, true, 0.0}, Output{}};
    return a;
}

ArchitectureSpec ArchitectureSpec::reference() {
    ArchitectureSpec a;
    a.layers = {Conv{96, 11, 4, 0, true},         MaxPool{3, 2},  Conv{256, 5, 1, 2, true},
                MaxPool{3, 2},                    Conv{384, 3, 1, 1, true}, Conv{384, 3, 1, 1, true},
                Conv{256, 3, 1, 1, true},         MaxPool{3, 2},  FullyConnected{4096, true, 0.5},
                FullyConnected{4096, true, 0.5}, Output{}};
    return a;
}

ArchitectureSpec ArchitectureSpec::parse(const std::string& text) {
    if (text == "desk") return desk();
    if (text == "reference") return reference();
    ArchitectureSpec a;
    std::stringstream ss(text);
    std::string tok;
    bool first = true;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        if (first && tok.rfind("in", 0) == 0) {
            std::size_t pos = 2;
            a.input.channels = parse_int(tok, pos);
            if (!consume(tok, pos, 'x')) fail(ErrorCode::IncompatibleArchitecture, "bad input '" + tok + "'");
            a.input.height = parse_int(tok, pos);
            if (!consume(tok, pos, 'x')) fail(ErrorCode::IncompatibleArchitecture, "bad input '" + tok + "'");
            a.input.width = parse_int(tok, pos);
            first = false;
            continue;
        }
        first = false;
        a.layers.push_back(parse_layer(tok));
    }
    if (a.layers.empty()) {
        fail(ErrorCode::IncompatibleArchitecture, "architecture '" + text + "' has no layers");
    }
    return a;
}

std::string ArchitectureSpec::describe() const {
    std::string s = "in" + std::to_string(input.channels) + "x" + std::to_string(input.height) + "x" +
                    std::to_string(input.width);
    for (const auto& layer : layers) {
        s += ",";
        s += std::visit(Overloaded{
                            [](const Conv& c) {
                                return "conv" + std::to_string(c.out_channels) + "k" + std::to_string(c.kernel) + "s" +
                                       std::to_string(c.stride) + "p" + std::to_string(c.pad) + (c.relu ? "" : "n");
                            },
                            [](const MaxPool& m) {
                                return "pool" + std::to_string(m.kernel) + "s" + std::to_string(m.stride);
                            },
                            [](const FullyConnected& f) {
                                std::string t = "fc" + std::to_string(f.out_features);
                                if (f.dropout > 0.0) t += "d" + trim_number(f.dropout);
                                if (!f.relu) t += "n";
                                return t;
                            },
                            [](const Output& o) {
                                return std::string("out") + (o.out_features > 0 ? std::to_string(o.out_features) : "");
                            },
                        },
                        layer);
    }
    return s;
}

std::vector<Shape> chain_shapes(const ArchitectureSpec& arch, std::size_t output_dim) {
    if (arch.input.channels <= 0 || arch.input.height <= 0 || arch.input.width <= 0) {
        fail(ErrorCode::IncompatibleArchitecture, "input shape must be positive");
    }
    if (arch.layers.empty() || !std::holds_alternative<Output>(arch.layers.back())) {
        fail(ErrorCode::IncompatibleArchitecture, "the last layer must be the regression output");
    }
    std::vector<Shape> shapes;
    Shape cur = arch.input;
    bool flat = false;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        const auto& layer = arch.layers[l];
        const std::string where = "layer " + std::to_string(l) + ": ";
        if (const auto* c = std::get_if<Conv>(&layer)) {
            if (flat) fail(ErrorCode::IncompatibleArchitecture, where + "convolution after a dense layer");
            if (c->out_channels <= 0 || c->kernel <= 0 || c->stride <= 0 || c->pad < 0) {
                fail(ErrorCode::IncompatibleArchitecture, where + "invalid convolution parameters");
            }
            const int h = conv_extent(cur.height, c->kernel, c->stride, c->pad);
            const int w = conv_extent(cur.width, c->kernel, c->stride, c->pad);
            if (h <= 0 || w <= 0) fail(ErrorCode::IncompatibleArchitecture, where + "kernel larger than input");
            cur = Shape{c->out_channels, h, w};
        } else if (const auto* m = std::get_if<MaxPool>(&layer)) {
            if (flat) fail(ErrorCode::IncompatibleArchitecture, where + "pooling after a dense layer");
            if (m->kernel <= 0 || m->stride <= 0) {
                fail(ErrorCode::IncompatibleArchitecture, where + "invalid pooling parameters");
            }
            const int h = conv_extent(cur.height, m->kernel, m->stride, 0);
            const int w = conv_extent(cur.width, m->kernel, m->stride, 0);
            if (h <= 0 || w <= 0) fail(ErrorCode::IncompatibleArchitecture, where + "pool window larger than input");
            cur = Shape{cur.channels, h, w};
        } else if (const auto* f = std::get_if<FullyConnected>(&layer)) {
            if (f->out_features <= 0 || !(f->dropout >= 0.0 && f->dropout < 1.0)) {
                fail(ErrorCode::IncompatibleArchitecture, where + "invalid dense parameters");
            }
            cur = Shape{f->out_features, 1, 1};
            flat = true;
        } else {
            const auto& o = std::get<Output>(layer);
            if (l + 1 != arch.layers.size()) {
                fail(ErrorCode::IncompatibleArchitecture, where + "output layer must come last");
            }
            if (o.out_features > 0 && output_dim > 0 && static_cast<std::size_t>(o.out_features) != output_dim) {
                fail(ErrorCode::IncompatibleArchitecture, where + "output width " + std::to_string(o.out_features) +
                                                              " does not match " + std::to_string(output_dim));
            }
            const std::size_t width = output_dim > 0 ? output_dim : static_cast<std::size_t>(o.out_features);
            if (width == 0) fail(ErrorCode::IncompatibleArchitecture, where + "output width is zero");
            cur = Shape{static_cast<int>(width), 1, 1};
        }
        shapes.push_back(cur);
    }
    return shapes;
}

std::vector<std::vector<int>> weight_shapes(const ArchitectureSpec& arch, std::size_t output_dim) {
    const auto shapes = chain_shapes(arch, output_dim);
    std::vector<std::vector<int>> out;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        const Shape& in = l == 0 ? arch.input : shapes[l - 1];
        const auto& layer = arch.layers[l];
        if (const auto* c = std::get_if<Conv>(&layer)) {
            out.push_back({c->out_channels, in.channels, c->kernel, c->kernel});
        } else if (has_params(layer)) {
            out.push_back({static_cast<int>(in.size()), shapes[l].channels});
        }
    }
    return out;
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::Scratch: return "scratch";
        case Provenance::Finetune: return "finetune";
        case Provenance::Cascade: return "cascade";
    }
    return "?";
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "scratch") return Provenance::Scratch;
    if (s == "finetune") return Provenance::Finetune;
    if (s == "cascade") return Provenance::Cascade;
    fail(ErrorCode::InvalidArgument, "unknown provenance '" + std::string(s) + "'");
}

void fit_input_normalization(WeightStore& model, std::span<const Tensor> inputs) {
    const std::size_t size = model.arch.input.size();
    if (inputs.empty()) {
        fail(ErrorCode::EmptyDataset, "input normalization needs at least one input");
    }
    std::vector<double> mean(size, 0.0);
    for (const auto& x : inputs) {
        if (x.size() != size) fail(ErrorCode::ShapeMismatch, "input does not match the network input shape");
        for (std::size_t j = 0; j < size; ++j) mean[j] += x[j];
    }
    for (auto& v : mean) v /= static_cast<double>(inputs.size());
    double sq = 0.0;
    for (const auto& x : inputs) {
        for (std::size_t j = 0; j < size; ++j) {
            const double d = x[j] - mean[j];
            sq += d * d;
        }
    }
    const double sd = std::sqrt(sq / static_cast<double>(inputs.size() * size));
    model.input_mean.assign(mean.begin(), mean.end());
    model.input_scale = sd > 0.0 ? static_cast<float>(1.0 / sd) : 1.0f;
}

std::string weights_digest(const WeightStore& model) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const std::string arch = model.arch.describe();
    mix(arch.data(), arch.size());
    const std::uint64_t k = model.output_dim;
    mix(&k, sizeof(k));
    for (const auto& layer : model.layers) {
        mix(layer.weights.data(), layer.weights.size() * sizeof(float));
        mix(layer.biases.data(), layer.biases.size() * sizeof(float));
    }
    mix(model.input_mean.data(), model.input_mean.size() * sizeof(float));
    mix(&model.input_scale, sizeof(float));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

WeightStore build(const ArchitectureSpec& arch, std::size_t output_dim, std::uint64_t seed,
                  std::string target_family) {
    if (output_dim == 0) {
        fail(ErrorCode::IncompatibleArchitecture, "output width must be positive");
    }
    const auto shapes = weight_shapes(arch, output_dim);
    WeightStore model;
    model.arch = arch;
    model.output_dim = output_dim;
    std::size_t slot = 0;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        if (!has_params(arch.layers[l])) continue;
        LayerWeights lw;
        lw.layer_index = l;
        lw.weight_shape = shapes[slot];
        std::size_t count = 1;
        for (int d : lw.weight_shape) count *= static_cast<std::size_t>(d);
        std::size_t fan_in = 0;
        std::size_t fan_out = 0;
        if (std::holds_alternative<Conv>(arch.layers[l])) {
            fan_out = static_cast<std::size_t>(lw.weight_shape[0]);
            fan_in = count / fan_out;
        } else {
            fan_in = static_cast<std::size_t>(lw.weight_shape[0]);
            fan_out = static_cast<std::size_t>(lw.weight_shape[1]);
        }
        const bool relu_layer = !std::holds_alternative<Output>(arch.layers[l]);
        const double sd = std::sqrt((relu_layer ? 2.0 : 1.0) / static_cast<double>(fan_in));
        Rng rng(derive_seed(seed, l));
        lw.weights.resize(count);
        for (auto& w : lw.weights) w = static_cast<float>(rng.normal(0.0, sd));
        lw.biases.assign(fan_out, 0.0f);
        model.layers.push_back(std::move(lw));
        ++slot;
    }
    model.provenance = Provenance::Scratch;
    model.chain = {std::string("scratch:") + target_family};
    model.target_family = std::move(target_family);
    return model;
}

LossResult euclidean_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        fail(ErrorCode::ShapeMismatch, "prediction and target sizes differ");
    }
    LossResult r;
    r.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        r.grad[i] = d;
        r.loss += 0.5 * d * d;
    }
    return r;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorCode::InvalidArgument, "learning rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        fail(ErrorCode::InvalidArgument, "momentum must lie in [0, 1)");
    }
    if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch size must be positive");
    if (!(transferred_layer_lr_multiplier >= 0.0)) {
        fail(ErrorCode::InvalidArgument, "layer learning-rate multiplier must be non-negative");
    }
}

DivergenceError::DivergenceError(const std::string& message, WeightStore last, std::vector<double> hist)
    : Error(ErrorCode::DivergenceDetected, message), last_finite(std::move(last)), history(std::move(hist)) {}

TrainResult train(WeightStore model, std::span<const Tensor> inputs, std::span<const double> targets,
                  const TrainConfig& cfg) {
    cfg.validate();
    check_inputs(model, inputs, targets);
    const std::size_t n = inputs.size();
    if (n < cfg.batch_size) {
        fail(ErrorCode::TooFewSamples, "training needs at least batch_size (" + std::to_string(cfg.batch_size) +
                                           ") samples, got " + std::to_string(n));
    }
    const std::size_t k = model.output_dim;
    Net<float> net(model.arch, k, model.input_mean, model.input_scale);
    Params<float> params = params_from<float>(model);
    Params<float> velocity;
    for (std::size_t j = 0; j < params.w.size(); ++j) {
        velocity.w.emplace_back(params.w[j].size(), 0.0f);
        velocity.b.emplace_back(params.b[j].size(), 0.0f);
    }
    std::vector<double> rates(params.w.size());
    for (std::size_t j = 0; j < rates.size(); ++j) {
        rates[j] = cfg.learning_rate * (model.layers[j].transferred ? cfg.transferred_layer_lr_multiplier : 1.0);
    }

    TrainResult result;
    const auto ptrs = pointers(inputs);
    Params<float> grads;
    std::vector<float> gout;
    std::vector<const float*> batch;
    std::vector<double> batch_targets;
    std::vector<std::uint64_t> seeds;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(n, derive_seed(cfg.seed, 0x5eedULL, epoch));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t m = std::min(cfg.batch_size, n - start);
            batch.clear();
            batch_targets.clear();
            seeds.clear();
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t idx = order[start + i];
                batch.push_back(ptrs[idx]);
                batch_targets.insert(batch_targets.end(), targets.begin() + static_cast<std::ptrdiff_t>(idx * k),
                                     targets.begin() + static_cast<std::ptrdiff_t>((idx + 1) * k));
                seeds.push_back(derive_seed(cfg.seed, epoch + 1, idx));
            }
            net.forward(params, batch.data(), m, seeds);
            const double loss = mean_loss_and_grad(net.output(), batch_targets, m, k, &gout);
            if (!std::isfinite(loss)) {
                throw DivergenceError("loss became non-finite in epoch " + std::to_string(epoch + 1),
                                      std::move(model), std::move(result.loss_history));
            }
            net.backward(params, gout, grads);
            for (std::size_t j = 0; j < params.w.size(); ++j) {
                const auto lr = static_cast<float>(rates[j]);
                const auto mu = static_cast<float>(cfg.momentum);
                for (std::size_t i = 0; i < params.w[j].size(); ++i) {
                    velocity.w[j][i] = mu * velocity.w[j][i] - lr * grads.w[j][i];
                    params.w[j][i] += velocity.w[j][i];
                }
                for (std::size_t i = 0; i < params.b[j].size(); ++i) {
                    velocity.b[j][i] = mu * velocity.b[j][i] - lr * grads.b[j][i];
                    params.b[j][i] += velocity.b[j][i];
                }
            }
            epoch_loss += loss * static_cast<double>(m);
            bool finite = true;
            for (const auto& w : params.w) {
                for (float v : w) finite = finite && std::isfinite(v);
            }
            if (!finite) {
                throw DivergenceError("weights became non-finite in epoch " + std::to_string(epoch + 1),
                                      std::move(model), std::move(result.loss_history));
            }
            for (std::size_t j = 0; j < params.w.size(); ++j) {
                model.layers[j].weights = params.w[j];
                model.layers[j].biases = params.b[j];
            }
        }
        epoch_loss /= static_cast<double>(n);
        result.loss_history.push_back(epoch_loss);
        if (cfg.on_epoch) cfg.on_epoch(epoch + 1, epoch_loss);
    }
    result.model = std::move(model);
    return result;
}

TrainResult train(WeightStore model, std::span<const EncodedImage> images, std::span<const double> targets,
                  const TrainConfig& cfg) {
    std::vector<Tensor> inputs;
    inputs.reserve(images.size());
    for (const auto& img : images) inputs.push_back(img.pixels);
    return train(std::move(model), std::span<const Tensor>(inputs), targets, cfg);
}

std::vector<double> predict(const WeightStore& model, std::span<const float> input) {
    if (input.size() != model.arch.input.size()) {
        fail(ErrorCode::ShapeMismatch, "input does not match the network input shape");
    }
    Net<float> net(model.arch, model.output_dim, model.input_mean, model.input_scale);
    const Params<float> params = params_from<float>(model);
    const float* ptr = input.data();
    net.forward(params, &ptr, 1, {});
    return {net.output().begin(), net.output().end()};
}

std::vector<double> predict(const WeightStore& model, const EncodedImage& image) {
    return predict(model, std::span<const float>(image.pixels));
}

std::vector<std::vector<double>> predict_batch(const WeightStore& model, std::span<const Tensor> inputs) {
    for (const auto& x : inputs) {
        if (x.size() != model.arch.input.size()) {
            fail(ErrorCode::ShapeMismatch, "input does not match the network input shape");
        }
    }
    Net<float> net(model.arch, model.output_dim, model.input_mean, model.input_scale);
    const Params<float> params = params_from<float>(model);
    const auto ptrs = pointers(inputs);
    std::vector<std::vector<double>> out;
    out.reserve(inputs.size());
    // one sample per pass keeps batch results bitwise equal to predict()
    for (const float* p : ptrs) {
        net.forward(params, &p, 1, {});
        out.emplace_back(net.output().begin(), net.output().end());
    }
    return out;
}

std::vector<double> activations(const WeightStore& model, std::span<const float> input, std::size_t layer_index) {
    if (layer_index >= model.arch.layers.size()) {
        fail(ErrorCode::InvalidArgument, "layer index out of range");
    }
    if (input.size() != model.arch.input.size()) {
        fail(ErrorCode::ShapeMismatch, "input does not match the network input shape");
    }
    Net<float> net(model.arch, model.output_dim, model.input_mean, model.input_scale);
    const Params<float> params = params_from<float>(model);
    const float* ptr = input.data();
    net.forward(params, &ptr, 1, {});
    const auto& a = net.layer_output(layer_index);
    return {a.begin(), a.end()};
}

WeightStore transfer(const WeightStore& donor, const ArchitectureSpec& arch, std::size_t new_output_dim,
                     std::uint64_t seed, std::string target_family) {
    if (!(donor.arch.input == arch.input) || donor.arch.layers.size() != arch.layers.size()) {
        fail(ErrorCode::ShapeMismatch, "donor architecture differs from the target architecture");
    }
    for (std::size_t l = 0; l + 1 < arch.layers.size(); ++l) {
        if (!(donor.arch.layers[l] == arch.layers[l])) {
            fail(ErrorCode::ShapeMismatch, "donor layer " + std::to_string(l) + " differs from the target");
        }
    }
    WeightStore model = build(arch, new_output_dim, seed, target_family);
    if (donor.layers.size() != model.layers.size()) {
        fail(ErrorCode::ShapeMismatch, "donor has a different number of parameterised layers");
    }
    for (std::size_t j = 0; j + 1 < model.layers.size(); ++j) {
        if (donor.layers[j].weight_shape != model.layers[j].weight_shape) {
            fail(ErrorCode::ShapeMismatch, "donor weight shape differs at layer " +
                                               std::to_string(model.layers[j].layer_index));
        }
        model.layers[j].weights = donor.layers[j].weights;
        model.layers[j].biases = donor.layers[j].biases;
        model.layers[j].transferred = true;
    }
    model.input_mean = donor.input_mean;
    model.input_scale = donor.input_scale;
    model.provenance = donor.target_family == target_family ? Provenance::Finetune : Provenance::Cascade;
    model.chain = donor.chain;
    model.chain.push_back(std::string(to_string(model.provenance)) + ":" + target_family);
    model.donor_id = weights_digest(donor);
    return model;
}

GradientReport gradients(const WeightStore& model, std::span<const Tensor> inputs, std::span<const double> targets) {
    check_inputs(model, inputs, targets);
    Net<double> net(model.arch, model.output_dim, model.input_mean, model.input_scale);
    const Params<double> params = params_from<double>(model);
    const auto ptrs = pointers(inputs);
    net.forward(params, ptrs.data(), ptrs.size(), {});
    std::vector<double> gout;
    GradientReport report;
    report.loss = mean_loss_and_grad(net.output(), targets, ptrs.size(), model.output_dim, &gout);
    Params<double> grads;
    net.backward(params, gout, grads);
    report.weight_grads = std::move(grads.w);
    report.bias_grads = std::move(grads.b);
    return report;
}

double batch_loss(const WeightStore& model, const std::vector<std::vector<double>>& weights,
                  const std::vector<std::vector<double>>& biases, std::span<const Tensor> inputs,
                  std::span<const double> targets) {
    check_inputs(model, inputs, targets);
    if (weights.size() != model.layers.size() || biases.size() != model.layers.size()) {
        fail(ErrorCode::ShapeMismatch, "parameter list does not match the architecture");
    }
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j].size() != model.layers[j].weights.size() || biases[j].size() != model.layers[j].biases.size()) {
            fail(ErrorCode::ShapeMismatch, "parameter list does not match the architecture");
        }
    }
    Net<double> net(model.arch, model.output_dim, model.input_mean, model.input_scale);
    Params<double> params{weights, biases};
    const auto ptrs = pointers(inputs);
    net.forward(params, ptrs.data(), ptrs.size(), {});
    return mean_loss_and_grad<double>(net.output(), targets, ptrs.size(), model.output_dim, nullptr);
}

}  // namespace kjm::cnn

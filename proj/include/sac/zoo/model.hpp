#pragma once

// Small deterministic classifiers for the zoo: a plain MLP and a variant
// with a strided conv stem for architecture diversity. Forward and backward
// passes are explicit; weights are double precision throughout, and the
// SACM file format persists weights together with the training lineage.

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sac/common.hpp"
#include "sac/rng.hpp"

namespace sac::zoo {

// Pixel normalization shared by every forward path: zero-centered so deep
// ReLU stacks train from He init without collapsing.
inline constexpr double kInputMin = -0.5;
inline constexpr double kInputMax = 0.5;
inline double normalize_pixel(uint8_t v) { return static_cast<double>(v) / 255.0 - 0.5; }

enum class ArchKind { mlp, conv };

inline std::string arch_kind_name(ArchKind k) { return k == ArchKind::mlp ? "mlp" : "conv"; }

inline ArchKind arch_kind_from_name(const std::string& s) {
    if (s == "mlp") return ArchKind::mlp;
    if (s == "conv") return ArchKind::conv;
    throw ParseError("unknown arch kind '" + s + "'");
}

struct Arch {
    ArchKind kind = ArchKind::mlp;
    int input_width = 32;
    int input_height = 32;
    int input_channels = 3;
    std::vector<int> hidden = {256, 128};  // dense widths after the stem
    int conv_filters = 8;                  // conv kind only; 3x3, stride 2, pad 1
    int num_classes = 10;

    int input_dim() const { return input_width * input_height * input_channels; }
    int conv_out_w() const { return (input_width + 1) / 2; }
    int conv_out_h() const { return (input_height + 1) / 2; }
    int stem_dim() const {
        return kind == ArchKind::conv ? conv_filters * conv_out_w() * conv_out_h() : input_dim();
    }
    int embed_dim() const { return hidden.back(); }

    static Arch mlp(int num_classes, std::vector<int> hidden = {256, 128}) {
        Arch a;
        a.kind = ArchKind::mlp;
        a.hidden = std::move(hidden);
        a.num_classes = num_classes;
        return a;
    }
    static Arch conv(int num_classes, int filters = 16, std::vector<int> hidden = {128}) {
        Arch a;
        a.kind = ArchKind::conv;
        a.conv_filters = filters;
        a.hidden = std::move(hidden);
        a.num_classes = num_classes;
        return a;
    }

    bool operator==(const Arch&) const = default;

    nlohmann::json to_json() const {
        return {{"kind", arch_kind_name(kind)},   {"input_width", input_width},
                {"input_height", input_height},   {"input_channels", input_channels},
                {"hidden", hidden},               {"conv_filters", conv_filters},
                {"num_classes", num_classes}};
    }

    static Arch from_json(const nlohmann::json& j) {
        Arch a;
        a.kind = arch_kind_from_name(j.at("kind").get<std::string>());
        a.input_width = j.at("input_width").get<int>();
        a.input_height = j.at("input_height").get<int>();
        a.input_channels = j.at("input_channels").get<int>();
        a.hidden = j.at("hidden").get<std::vector<int>>();
        a.conv_filters = j.at("conv_filters").get<int>();
        a.num_classes = j.at("num_classes").get<int>();
        return a;
    }
};

struct Lineage {
    std::string kind = "source";  // source | irrelevant | finetune_all | ... | transferred
    nlohmann::json params = nlohmann::json::object();

    nlohmann::json to_json() const { return {{"kind", kind}, {"params", params}}; }
    static Lineage from_json(const nlohmann::json& j) {
        Lineage l;
        l.kind = j.at("kind").get<std::string>();
        l.params = j.value("params", nlohmann::json::object());
        return l;
    }
};

struct DenseLayer {
    int in = 0, out = 0;
    std::vector<double> w;  // in x out, row = input index
    std::vector<double> b;  // out
};

struct ConvLayer {
    int in_c = 0, out_c = 0;
    int in_w = 0, in_h = 0;
    // 3x3 kernels, stride 2, pad 1
    std::vector<double> w;  // out_c x in_c x 3 x 3
    std::vector<double> b;  // out_c
    int out_w() const { return (in_w + 1) / 2; }
    int out_h() const { return (in_h + 1) / 2; }
};

namespace nn_detail {

// C (m x n) = A (m x k) * B (k x n); ikj order so the inner loop is
// unit-stride on both B and C.
inline void gemm(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    std::fill(c, c + m * n, 0.0);
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t l = 0; l < k; ++l) {
            double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = b + l * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C (m x n) = A (m x k) * B^T where B is n x k.
inline void gemm_bt(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0;
            for (size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] = acc;
        }
    }
}

// C (k x n) += A^T (k x m as m x k) * B (m x n); accumulates into c.
inline void gemm_at_acc(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (size_t l = 0; l < k; ++l) {
            double av = arow[l];
            if (av == 0.0) continue;
            double* crow = c + l * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void softmax_row(std::span<const double> logits, std::span<double> probs) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (size_t i = 0; i < logits.size(); ++i) probs[i] /= sum;
}

}  // namespace nn_detail

// Per-batch forward state kept for backprop: activations entering each dense
// layer plus the conv stem input/pre-activation when present.
struct ForwardTrace {
    size_t batch = 0;
    std::vector<double> input;               // batch x input_dim (copy of x)
    std::vector<double> conv_pre;            // batch x stem_dim, pre-ReLU conv output
    std::vector<std::vector<double>> dense_in;   // activation entering dense layer i
    std::vector<std::vector<double>> dense_pre;  // pre-activation output of dense layer i
    std::vector<double>& logits() { return dense_pre.back(); }
    const std::vector<double>& logits() const { return dense_pre.back(); }
};

struct Gradients {
    std::vector<double> conv_w, conv_b;
    std::vector<std::vector<double>> dense_w, dense_b;
    std::vector<double> input;  // batch x input_dim; filled only when requested
};

struct ZooModel {
    Arch arch;
    Lineage lineage;
    uint64_t train_seed = 0;
    std::optional<ConvLayer> stem;
    std::vector<DenseLayer> dense;  // hidden layers then the classification head

    DenseLayer& head() { return dense.back(); }
    const DenseLayer& head() const { return dense.back(); }

    void forward_batch(const double* x, size_t batch, ForwardTrace& t) const {
        t.batch = batch;
        size_t in_dim = static_cast<size_t>(arch.input_dim());
        t.input.assign(x, x + batch * in_dim);

        const double* cur = x;
        size_t cur_dim = in_dim;
        std::vector<double> stem_act;
        if (stem) {
            conv_forward(*stem, x, batch, t.conv_pre);
            stem_act = t.conv_pre;
            for (auto& v : stem_act) v = std::max(0.0, v);
            cur = stem_act.data();
            cur_dim = static_cast<size_t>(arch.stem_dim());
        }

        t.dense_in.assign(dense.size(), {});
        t.dense_pre.assign(dense.size(), {});
        std::vector<double> act(cur, cur + batch * cur_dim);
        for (size_t li = 0; li < dense.size(); ++li) {
            const DenseLayer& layer = dense[li];
            t.dense_in[li] = act;
            auto& pre = t.dense_pre[li];
            pre.resize(batch * layer.out);
            nn_detail::gemm(act.data(), layer.w.data(), pre.data(), batch, layer.in, layer.out);
            for (size_t s = 0; s < batch; ++s)
                for (int j = 0; j < layer.out; ++j) pre[s * layer.out + j] += layer.b[j];
            if (li + 1 < dense.size()) {
                act = pre;
                for (auto& v : act) v = std::max(0.0, v);
            }
        }
    }

    // Backprop from d(loss)/d(logits). Gradients are summed over the batch;
    // the caller divides by batch size. Set want_input_grad for FGSM.
    void backward_batch(const ForwardTrace& t, const std::vector<double>& dlogits, Gradients& g,
                        bool want_input_grad = false) const {
        size_t batch = t.batch;
        g.dense_w.assign(dense.size(), {});
        g.dense_b.assign(dense.size(), {});

        std::vector<double> delta = dlogits;  // batch x dense.back().out
        for (size_t li = dense.size(); li-- > 0;) {
            const DenseLayer& layer = dense[li];
            g.dense_w[li].assign(layer.w.size(), 0.0);
            g.dense_b[li].assign(layer.b.size(), 0.0);
            nn_detail::gemm_at_acc(t.dense_in[li].data(), delta.data(), g.dense_w[li].data(), batch, layer.in,
                                   layer.out);
            for (size_t s = 0; s < batch; ++s)
                for (int j = 0; j < layer.out; ++j) g.dense_b[li][j] += delta[s * layer.out + j];

            bool need_upstream = li > 0 || stem.has_value() || want_input_grad;
            if (!need_upstream) { delta.clear(); break; }
            std::vector<double> dprev(batch * layer.in);
            nn_detail::gemm_bt(delta.data(), layer.w.data(), dprev.data(), batch, layer.out, layer.in);
            if (li > 0) {
                const auto& pre = t.dense_pre[li - 1];
                for (size_t i = 0; i < dprev.size(); ++i)
                    if (pre[i] <= 0.0) dprev[i] = 0.0;
            }
            delta = std::move(dprev);
        }

        if (stem) {
            for (size_t i = 0; i < delta.size(); ++i)
                if (t.conv_pre[i] <= 0.0) delta[i] = 0.0;
            conv_backward(*stem, t.input.data(), batch, delta, g, want_input_grad);
        } else if (want_input_grad) {
            g.input = std::move(delta);
        }
    }

    std::vector<double> logits_one(std::span<const double> x) const {
        ForwardTrace t;
        forward_batch(x.data(), 1, t);
        return t.logits();
    }

    std::vector<double> probabilities_one(std::span<const double> x) const {
        auto z = logits_one(x);
        std::vector<double> p(z.size());
        nn_detail::softmax_row(z, p);
        return p;
    }

    // Penultimate activations (input to the classification head).
    std::vector<double> embed_one(std::span<const double> x) const {
        ForwardTrace t;
        forward_batch(x.data(), 1, t);
        std::vector<double> e = t.dense_in.back();
        return e;
    }

    int predict_one(std::span<const double> x) const {
        auto z = logits_one(x);
        return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }

    void check_finite() const {
        auto scan = [](const std::vector<double>& v) {
            for (double x : v)
                if (!std::isfinite(x)) throw TrainingDiverged("model weights are not finite");
        };
        if (stem) { scan(stem->w); scan(stem->b); }
        for (const auto& l : dense) { scan(l.w); scan(l.b); }
    }

private:
    static void conv_forward(const ConvLayer& c, const double* x, size_t batch, std::vector<double>& out) {
        int ow = c.out_w(), oh = c.out_h();
        out.assign(batch * c.out_c * ow * oh, 0.0);
        for (size_t s = 0; s < batch; ++s) {
            const double* img = x + s * c.in_w * c.in_h * c.in_c;
            double* o = out.data() + s * c.out_c * ow * oh;
            for (int f = 0; f < c.out_c; ++f) {
                const double* wf = c.w.data() + static_cast<size_t>(f) * c.in_c * 9;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        double acc = c.b[f];
                        for (int ch = 0; ch < c.in_c; ++ch) {
                            for (int ky = 0; ky < 3; ++ky) {
                                int y = oy * 2 + ky - 1;
                                if (y < 0 || y >= c.in_h) continue;
                                for (int kx = 0; kx < 3; ++kx) {
                                    int xx = ox * 2 + kx - 1;
                                    if (xx < 0 || xx >= c.in_w) continue;
                                    acc += wf[ch * 9 + ky * 3 + kx] * img[(y * c.in_w + xx) * c.in_c + ch];
                                }
                            }
                        }
                        o[(f * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
    }

    static void conv_backward(const ConvLayer& c, const double* x, size_t batch, const std::vector<double>& dout,
                              Gradients& g, bool want_input_grad) {
        int ow = c.out_w(), oh = c.out_h();
        g.conv_w.assign(c.w.size(), 0.0);
        g.conv_b.assign(c.b.size(), 0.0);
        if (want_input_grad) g.input.assign(batch * c.in_w * c.in_h * c.in_c, 0.0);
        for (size_t s = 0; s < batch; ++s) {
            const double* img = x + s * c.in_w * c.in_h * c.in_c;
            const double* d = dout.data() + s * c.out_c * ow * oh;
            double* dimg = want_input_grad ? g.input.data() + s * c.in_w * c.in_h * c.in_c : nullptr;
            for (int f = 0; f < c.out_c; ++f) {
                const double* wf = c.w.data() + static_cast<size_t>(f) * c.in_c * 9;
                double* gwf = g.conv_w.data() + static_cast<size_t>(f) * c.in_c * 9;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        double dv = d[(f * oh + oy) * ow + ox];
                        if (dv == 0.0) continue;
                        g.conv_b[f] += dv;
                        for (int ch = 0; ch < c.in_c; ++ch) {
                            for (int ky = 0; ky < 3; ++ky) {
                                int y = oy * 2 + ky - 1;
                                if (y < 0 || y >= c.in_h) continue;
                                for (int kx = 0; kx < 3; ++kx) {
                                    int xx = ox * 2 + kx - 1;
                                    if (xx < 0 || xx >= c.in_w) continue;
                                    size_t pix = (static_cast<size_t>(y) * c.in_w + xx) * c.in_c + ch;
                                    gwf[ch * 9 + ky * 3 + kx] += dv * img[pix];
                                    if (dimg) dimg[pix] += dv * wf[ch * 9 + ky * 3 + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
};

// He-normal initialization from the model's own seeded stream.
inline ZooModel init_model(const Arch& arch, uint64_t seed) {
    ZooModel m;
    m.arch = arch;
    m.train_seed = seed;
    Rng rng(mix_seed(seed, "model-init"));
    auto he_fill = [&](std::vector<double>& w, int fan_in) {
        double scale = std::sqrt(2.0 / fan_in);
        for (auto& v : w) v = rng.normal(0.0, scale);
    };
    if (arch.kind == ArchKind::conv) {
        ConvLayer c;
        c.in_c = arch.input_channels;
        c.out_c = arch.conv_filters;
        c.in_w = arch.input_width;
        c.in_h = arch.input_height;
        c.w.resize(static_cast<size_t>(c.out_c) * c.in_c * 9);
        c.b.assign(c.out_c, 0.0);
        he_fill(c.w, c.in_c * 9);
        m.stem = std::move(c);
    }
    int prev = arch.stem_dim();
    for (size_t i = 0; i <= arch.hidden.size(); ++i) {
        DenseLayer l;
        l.in = prev;
        l.out = i < arch.hidden.size() ? arch.hidden[i] : arch.num_classes;
        l.w.resize(static_cast<size_t>(l.in) * l.out);
        l.b.assign(l.out, 0.0);
        he_fill(l.w, l.in);
        prev = l.out;
        m.dense.push_back(std::move(l));
    }
    return m;
}

// ---- SACM model file -------------------------------------------------------

inline constexpr char kSacmMagic[4] = {'S', 'A', 'C', 'M'};
inline constexpr uint16_t kSacmVersion = 1;

inline void save_model(const ZooModel& m, const std::filesystem::path& path) {
    ByteWriter w;
    w.bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kSacmMagic), 4));
    w.u16(kSacmVersion);
    w.str(m.arch.to_json().dump());
    w.str(m.lineage.to_json().dump());
    w.u64(m.train_seed);
    std::vector<const std::vector<double>*> tensors;
    if (m.stem) { tensors.push_back(&m.stem->w); tensors.push_back(&m.stem->b); }
    for (const auto& l : m.dense) { tensors.push_back(&l.w); tensors.push_back(&l.b); }
    w.u32(static_cast<uint32_t>(tensors.size()));
    for (const auto* t : tensors) {
        w.u64(t->size());
        for (double v : *t) w.f64(v);
    }
    write_file(path, w.data());
}

inline ZooModel load_model(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    ByteReader r(bytes);
    auto magic = r.raw(4);
    if (std::memcmp(magic.data(), kSacmMagic, 4) != 0) throw ParseError("not a SACM file (bad magic)");
    if (r.u16() != kSacmVersion) throw ParseError("unsupported SACM version");
    Arch arch;
    Lineage lineage;
    try {
        arch = Arch::from_json(nlohmann::json::parse(r.str()));
        lineage = Lineage::from_json(nlohmann::json::parse(r.str()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad SACM descriptor: ") + e.what());
    }
    uint64_t seed = r.u64();
    ZooModel m = init_model(arch, seed);
    m.lineage = lineage;
    std::vector<std::vector<double>*> tensors;
    if (m.stem) { tensors.push_back(&m.stem->w); tensors.push_back(&m.stem->b); }
    for (auto& l : m.dense) { tensors.push_back(&l.w); tensors.push_back(&l.b); }
    uint32_t count = r.u32();
    if (count != tensors.size())
        throw ParseError("SACM tensor count " + std::to_string(count) + " does not match arch (" +
                         std::to_string(tensors.size()) + ")");
    for (auto* t : tensors) {
        uint64_t len = r.u64();
        if (len != t->size())
            throw ParseError("SACM tensor length " + std::to_string(len) + " does not match arch");
        for (auto& v : *t) v = r.f64();
    }
    if (!r.done()) throw ParseError("trailing bytes after SACM payload");
    m.check_finite();
    return m;
}

}  // namespace sac::zoo

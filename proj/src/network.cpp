#include "cobench/network.hpp"

#include "cobench/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cobench {

namespace {

struct Dims {
    int h1, w1;   // after pool1
    int h2, w2;   // after pool2
    int flat;     // dense input size
};

Dims cnn_dims(const ModelArch& a) {
    Dims d{};
    d.h1 = a.height / 2;
    d.w1 = a.width / 2;
    d.h2 = d.h1 / 2;
    d.w2 = d.w1 / 2;
    d.flat = a.conv2 * d.h2 * d.w2;
    return d;
}

// 3x3 convolution, zero padding 1, stride 1, CHW layout.
template <typename T>
void conv3x3_forward(const T* in, int cin, int H, int W, const T* weight, const T* bias, int cout, T* out) {
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    for (int oc = 0; oc < cout; ++oc) {
        T* dst_plane = out + oc * hw;
        std::fill(dst_plane, dst_plane + hw, bias[oc]);
        for (int ic = 0; ic < cin; ++ic) {
            const T* src_plane = in + ic * hw;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    const T w = weight[((oc * cin + ic) * 3 + ky) * 3 + kx];
                    for (int y = y0; y < y1; ++y) {
                        T* dst = dst_plane + y * W;
                        const T* src = src_plane + (y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) dst[x] += w * src[x];
                    }
                }
            }
        }
    }
}

// d_out is the gradient w.r.t. the conv output (pre-activation).
template <typename T>
void conv3x3_backward(const T* in, int cin, int H, int W, const T* weight, int cout, const T* d_out, T* d_weight,
                      T* d_bias, T* d_in) {
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    if (d_in) std::fill(d_in, d_in + cin * hw, T(0));
    for (int oc = 0; oc < cout; ++oc) {
        const T* g_plane = d_out + oc * hw;
        T bsum = 0;
        for (std::size_t i = 0; i < hw; ++i) bsum += g_plane[i];
        d_bias[oc] += bsum;
        for (int ic = 0; ic < cin; ++ic) {
            const T* src_plane = in + ic * hw;
            T* din_plane = d_in ? d_in + ic * hw : nullptr;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    const std::size_t widx = ((oc * cin + ic) * 3 + ky) * 3 + kx;
                    const T w = weight[widx];
                    T acc = 0;
                    for (int y = y0; y < y1; ++y) {
                        const T* g = g_plane + y * W;
                        const T* src = src_plane + (y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) acc += g[x] * src[x];
                        if (din_plane) {
                            T* din = din_plane + (y + dy) * W + dx;
                            for (int x = x0; x < x1; ++x) din[x] += w * g[x];
                        }
                    }
                    d_weight[widx] += acc;
                }
            }
        }
    }
}

template <typename T>
void relu_inplace(std::vector<T>& v) {
    for (T& x : v) x = x > T(0) ? x : T(0);
}

// 2x2 max pool, stride 2; records the flat source index of each maximum
// (first maximum wins on ties).
template <typename T>
void maxpool_forward(const T* in, int C, int H, int W, T* out, std::size_t* arg) {
    const int ho = H / 2, wo = W / 2;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < ho; ++y)
            for (int x = 0; x < wo; ++x) {
                std::size_t best = (static_cast<std::size_t>(c) * H + 2 * y) * W + 2 * x;
                for (int sy = 0; sy < 2; ++sy)
                    for (int sx = 0; sx < 2; ++sx) {
                        const std::size_t idx = (static_cast<std::size_t>(c) * H + 2 * y + sy) * W + 2 * x + sx;
                        if (in[idx] > in[best]) best = idx;
                    }
                const std::size_t o = (static_cast<std::size_t>(c) * ho + y) * wo + x;
                out[o] = in[best];
                arg[o] = best;
            }
}

} // namespace

std::string_view to_string(ArchKind kind) { return kind == ArchKind::mlp ? "mlp" : "cnn"; }

ArchKind parse_arch_kind(std::string_view name) {
    if (name == "mlp") return ArchKind::mlp;
    if (name == "cnn") return ArchKind::cnn;
    throw ValidationError("unknown architecture '" + std::string(name) + "' (expected mlp or cnn)");
}

void ModelArch::validate() const {
    if (height < 1 || width < 1) throw ValidationError("arch: input size must be positive");
    if (channels != 1 && channels != 3) throw ValidationError("arch: channels must be 1 or 3");
    if (classes < 2) throw ValidationError("arch: need at least 2 classes");
    if (kind == ArchKind::mlp && hidden < 1) throw ValidationError("arch: mlp hidden size must be positive");
    if (kind == ArchKind::cnn) {
        if (conv1 < 1 || conv2 < 1) throw ValidationError("arch: conv channel counts must be positive");
        if (height < 4 || width < 4) throw ValidationError("arch: cnn input must be at least 4x4");
    }
}

std::string ModelArch::describe() const {
    std::string s(to_string(kind));
    s += "(" + std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels) + "->" +
         std::to_string(classes);
    if (kind == ArchKind::mlp)
        s += ",hidden=" + std::to_string(hidden);
    else
        s += ",conv=" + std::to_string(conv1) + "/" + std::to_string(conv2);
    return s + ")";
}

std::vector<ParamBlock> parameter_layout(const ModelArch& arch) {
    arch.validate();
    std::vector<ParamBlock> blocks;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t size, std::size_t fan_in, bool weight) {
        blocks.push_back(ParamBlock{std::move(name), offset, size, fan_in, weight});
        offset += size;
    };
    const std::size_t in = static_cast<std::size_t>(arch.height) * arch.width * arch.channels;
    if (arch.kind == ArchKind::mlp) {
        add("fc1.weight", arch.hidden * in, in, true);
        add("fc1.bias", arch.hidden, in, false);
        add("fc2.weight", static_cast<std::size_t>(arch.classes) * arch.hidden, arch.hidden, true);
        add("fc2.bias", arch.classes, arch.hidden, false);
    } else {
        const Dims d = cnn_dims(arch);
        add("conv1.weight", static_cast<std::size_t>(arch.conv1) * arch.channels * 9, arch.channels * 9, true);
        add("conv1.bias", arch.conv1, arch.channels * 9, false);
        add("conv2.weight", static_cast<std::size_t>(arch.conv2) * arch.conv1 * 9, arch.conv1 * 9, true);
        add("conv2.bias", arch.conv2, arch.conv1 * 9, false);
        add("fc.weight", static_cast<std::size_t>(arch.classes) * d.flat, d.flat, true);
        add("fc.bias", arch.classes, d.flat, false);
    }
    return blocks;
}

std::size_t parameter_count(const ModelArch& arch) {
    const auto blocks = parameter_layout(arch);
    return blocks.back().offset + blocks.back().size;
}

template <typename T>
void prepare_workspace(const ModelArch& arch, Workspace<T>& ws) {
    const std::size_t in = static_cast<std::size_t>(arch.height) * arch.width * arch.channels;
    ws.input.resize(in);
    ws.logits.resize(arch.classes);
    ws.d_logits.resize(arch.classes);
    if (arch.kind == ArchKind::mlp) {
        ws.hidden.resize(arch.hidden);
        ws.d_hidden.resize(arch.hidden);
    } else {
        const Dims d = cnn_dims(arch);
        const std::size_t hw = static_cast<std::size_t>(arch.height) * arch.width;
        ws.a1.resize(arch.conv1 * hw);
        ws.d_a1.resize(arch.conv1 * hw);
        ws.p1.resize(static_cast<std::size_t>(arch.conv1) * d.h1 * d.w1);
        ws.d_p1.resize(ws.p1.size());
        ws.arg1.resize(ws.p1.size());
        ws.a2.resize(static_cast<std::size_t>(arch.conv2) * d.h1 * d.w1);
        ws.d_a2.resize(ws.a2.size());
        ws.p2.resize(static_cast<std::size_t>(d.flat));
        ws.d_p2.resize(ws.p2.size());
        ws.arg2.resize(ws.p2.size());
    }
}

template <typename T>
std::span<const T> forward_sample(const ModelArch& arch, std::span<const T> params, const Image& image,
                                  Workspace<T>& ws) {
    if (image.height() != arch.height || image.width() != arch.width || image.channels() != arch.channels)
        throw ValidationError("forward: image " + std::to_string(image.height()) + "x" +
                              std::to_string(image.width()) + "x" + std::to_string(image.channels()) +
                              " does not match " + arch.describe());
    if (ws.logits.size() != static_cast<std::size_t>(arch.classes)) prepare_workspace(arch, ws);
    const T* p = params.data();
    const int K = arch.classes;

    if (arch.kind == ArchKind::mlp) {
        const auto src = image.data();
        for (std::size_t i = 0; i < src.size(); ++i) ws.input[i] = T(2) * static_cast<T>(src[i]) - T(1);
        const std::size_t in = ws.input.size();
        const T* w1 = p;
        const T* b1 = w1 + arch.hidden * in;
        const T* w2 = b1 + arch.hidden;
        const T* b2 = w2 + static_cast<std::size_t>(K) * arch.hidden;
        for (int j = 0; j < arch.hidden; ++j) {
            const T* row = w1 + j * in;
            T acc = b1[j];
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * ws.input[i];
            ws.hidden[j] = acc > T(0) ? acc : T(0);
        }
        for (int k = 0; k < K; ++k) {
            const T* row = w2 + static_cast<std::size_t>(k) * arch.hidden;
            T acc = b2[k];
            for (int j = 0; j < arch.hidden; ++j) acc += row[j] * ws.hidden[j];
            ws.logits[k] = acc;
        }
        return ws.logits;
    }

    // cnn: convert HWC -> CHW.
    const int H = arch.height, W = arch.width, C = arch.channels;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
                ws.input[(static_cast<std::size_t>(c) * H + y) * W + x] = T(2) * static_cast<T>(image.at(y, x, c)) - T(1);
    const Dims d = cnn_dims(arch);
    const T* cw1 = p;
    const T* cb1 = cw1 + arch.conv1 * C * 9;
    const T* cw2 = cb1 + arch.conv1;
    const T* cb2 = cw2 + arch.conv2 * arch.conv1 * 9;
    const T* fw = cb2 + arch.conv2;
    const T* fb = fw + static_cast<std::size_t>(K) * d.flat;

    conv3x3_forward(ws.input.data(), C, H, W, cw1, cb1, arch.conv1, ws.a1.data());
    relu_inplace(ws.a1);
    maxpool_forward(ws.a1.data(), arch.conv1, H, W, ws.p1.data(), ws.arg1.data());
    conv3x3_forward(ws.p1.data(), arch.conv1, d.h1, d.w1, cw2, cb2, arch.conv2, ws.a2.data());
    relu_inplace(ws.a2);
    maxpool_forward(ws.a2.data(), arch.conv2, d.h1, d.w1, ws.p2.data(), ws.arg2.data());
    for (int k = 0; k < K; ++k) {
        const T* row = fw + static_cast<std::size_t>(k) * d.flat;
        T acc = fb[k];
        for (int i = 0; i < d.flat; ++i) acc += row[i] * ws.p2[i];
        ws.logits[k] = acc;
    }
    return ws.logits;
}

template <typename T>
void backward_sample(const ModelArch& arch, std::span<const T> params, Workspace<T>& ws, std::span<T> grads) {
    const T* p = params.data();
    T* g = grads.data();
    const int K = arch.classes;

    if (arch.kind == ArchKind::mlp) {
        const std::size_t in = ws.input.size();
        const std::size_t o_b1 = arch.hidden * in, o_w2 = o_b1 + arch.hidden,
                          o_b2 = o_w2 + static_cast<std::size_t>(K) * arch.hidden;
        const T* w2 = p + o_w2;
        std::fill(ws.d_hidden.begin(), ws.d_hidden.end(), T(0));
        for (int k = 0; k < K; ++k) {
            const T dl = ws.d_logits[k];
            g[o_b2 + k] += dl;
            T* gw = g + o_w2 + static_cast<std::size_t>(k) * arch.hidden;
            const T* row = w2 + static_cast<std::size_t>(k) * arch.hidden;
            for (int j = 0; j < arch.hidden; ++j) {
                gw[j] += dl * ws.hidden[j];
                ws.d_hidden[j] += dl * row[j];
            }
        }
        for (int j = 0; j < arch.hidden; ++j) {
            if (!(ws.hidden[j] > T(0))) continue;
            const T dh = ws.d_hidden[j];
            g[o_b1 + j] += dh;
            T* gw = g + j * in;
            for (std::size_t i = 0; i < in; ++i) gw[i] += dh * ws.input[i];
        }
        return;
    }

    const int H = arch.height, W = arch.width, C = arch.channels;
    const Dims d = cnn_dims(arch);
    const std::size_t o_cb1 = static_cast<std::size_t>(arch.conv1) * C * 9;
    const std::size_t o_cw2 = o_cb1 + arch.conv1;
    const std::size_t o_cb2 = o_cw2 + static_cast<std::size_t>(arch.conv2) * arch.conv1 * 9;
    const std::size_t o_fw = o_cb2 + arch.conv2;
    const std::size_t o_fb = o_fw + static_cast<std::size_t>(K) * d.flat;

    // Dense layer.
    std::fill(ws.d_p2.begin(), ws.d_p2.end(), T(0));
    for (int k = 0; k < K; ++k) {
        const T dl = ws.d_logits[k];
        g[o_fb + k] += dl;
        T* gw = g + o_fw + static_cast<std::size_t>(k) * d.flat;
        const T* row = p + o_fw + static_cast<std::size_t>(k) * d.flat;
        for (int i = 0; i < d.flat; ++i) {
            gw[i] += dl * ws.p2[i];
            ws.d_p2[i] += dl * row[i];
        }
    }
    // Pool2 + ReLU2.
    std::fill(ws.d_a2.begin(), ws.d_a2.end(), T(0));
    for (std::size_t i = 0; i < ws.p2.size(); ++i)
        if (ws.a2[ws.arg2[i]] > T(0)) ws.d_a2[ws.arg2[i]] += ws.d_p2[i];
    conv3x3_backward(ws.p1.data(), arch.conv1, d.h1, d.w1, p + o_cw2, arch.conv2, ws.d_a2.data(), g + o_cw2,
                     g + o_cb2, ws.d_p1.data());
    // Pool1 + ReLU1.
    std::fill(ws.d_a1.begin(), ws.d_a1.end(), T(0));
    for (std::size_t i = 0; i < ws.p1.size(); ++i)
        if (ws.a1[ws.arg1[i]] > T(0)) ws.d_a1[ws.arg1[i]] += ws.d_p1[i];
    conv3x3_backward(ws.input.data(), C, H, W, p, arch.conv1, ws.d_a1.data(), g, g + o_cb1, static_cast<T*>(nullptr));
}

template <typename T>
T cross_entropy(std::span<const T> logits, int label, std::span<T> d_logits, T scale) {
    T m = logits[0];
    for (T v : logits) m = std::max(m, v);
    T sum = 0;
    for (T v : logits) sum += std::exp(v - m);
    const T lse = m + std::log(sum);
    if (!d_logits.empty()) {
        for (std::size_t k = 0; k < logits.size(); ++k) {
            const T prob = std::exp(logits[k] - lse);
            d_logits[k] = scale * (prob - (static_cast<int>(k) == label ? T(1) : T(0)));
        }
    }
    return lse - logits[static_cast<std::size_t>(label)];
}

template <typename T>
T weight_decay_term(const ModelArch& arch, std::span<const T> params, double weight_decay) {
    if (weight_decay == 0.0) return T(0);
    T sum = 0;
    for (const auto& block : parameter_layout(arch))
        if (block.is_weight)
            for (std::size_t i = block.offset; i < block.offset + block.size; ++i) sum += params[i] * params[i];
    return static_cast<T>(weight_decay / 2.0) * sum;
}

template <typename T>
T batch_loss(const ModelArch& arch, std::span<const T> params, std::span<const Image* const> images,
             std::span<const int> labels, double weight_decay, std::span<T> grads) {
    if (images.size() != labels.size() || images.empty())
        throw ValidationError("batch_loss: need a non-empty batch with one label per image");
    if (params.size() != parameter_count(arch)) throw ValidationError("batch_loss: parameter count mismatch");
    const bool want_grad = !grads.empty();
    if (want_grad) {
        if (grads.size() != params.size()) throw ValidationError("batch_loss: gradient buffer size mismatch");
        std::fill(grads.begin(), grads.end(), T(0));
    }
    Workspace<T> ws;
    prepare_workspace(arch, ws);
    const T inv_n = T(1) / static_cast<T>(images.size());
    T total = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= arch.classes) throw ValidationError("batch_loss: label out of range");
        const auto logits = forward_sample<T>(arch, params, *images[i], ws);
        if (want_grad) {
            total += cross_entropy<T>(logits, labels[i], ws.d_logits, inv_n);
            backward_sample<T>(arch, params, ws, grads);
        } else {
            total += cross_entropy<T>(logits, labels[i]);
        }
    }
    T loss = total * inv_n + weight_decay_term<T>(arch, params, weight_decay);
    if (want_grad && weight_decay != 0.0) {
        const T wd = static_cast<T>(weight_decay);
        for (const auto& block : parameter_layout(arch))
            if (block.is_weight)
                for (std::size_t i = block.offset; i < block.offset + block.size; ++i) grads[i] += wd * params[i];
    }
    return loss;
}

template <typename T>
int argmax(std::span<const T> logits) {
    int best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k)
        if (logits[k] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

#define COBENCH_INSTANTIATE(T)                                                                                      \
    template void prepare_workspace<T>(const ModelArch&, Workspace<T>&);                                            \
    template std::span<const T> forward_sample<T>(const ModelArch&, std::span<const T>, const Image&, Workspace<T>&); \
    template void backward_sample<T>(const ModelArch&, std::span<const T>, Workspace<T>&, std::span<T>);            \
    template T cross_entropy<T>(std::span<const T>, int, std::span<T>, T);                                          \
    template T weight_decay_term<T>(const ModelArch&, std::span<const T>, double);                                  \
    template T batch_loss<T>(const ModelArch&, std::span<const T>, std::span<const Image* const>,                   \
                             std::span<const int>, double, std::span<T>);                                           \
    template int argmax<T>(std::span<const T>);

COBENCH_INSTANTIATE(float)
COBENCH_INSTANTIATE(double)

#undef COBENCH_INSTANTIATE

} // namespace cobench

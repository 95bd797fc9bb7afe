#pragma once

#include "cobench/image.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cobench {

enum class ArchKind { mlp, cnn };

std::string_view to_string(ArchKind kind);
ArchKind parse_arch_kind(std::string_view name);

// Inputs are centred to [-1, 1] (2v - 1) before the first layer.
// mlp: flatten -> hidden ReLU -> classes
// cnn: 3x3 conv(conv1) ReLU, 2x2 maxpool, 3x3 conv(conv2) ReLU, 2x2 maxpool,
//      dense -> classes. Convolutions use zero padding 1; pooling floors odd
//      sizes.
struct ModelArch {
    ArchKind kind = ArchKind::cnn;
    int height = 32;
    int width = 32;
    int channels = 3;
    int classes = 10;
    int hidden = 256;
    int conv1 = 16;
    int conv2 = 32;

    void validate() const;
    std::string describe() const;
    friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
    std::size_t fan_in = 0;
    bool is_weight = false; // weight decay applies to weights only
};

std::vector<ParamBlock> parameter_layout(const ModelArch& arch);
std::size_t parameter_count(const ModelArch& arch);

// Per-sample activations kept for the backward pass.
template <typename T>
struct Workspace {
    std::vector<T> input;
    std::vector<T> a1, p1, a2, p2; // cnn: conv1 out, pool1 out, conv2 out, pool2 out
    std::vector<std::size_t> arg1, arg2;
    std::vector<T> hidden;          // mlp hidden activations
    std::vector<T> logits;
    std::vector<T> d_logits, d_p2, d_a2, d_p1, d_a1, d_hidden;
};

template <typename T>
void prepare_workspace(const ModelArch& arch, Workspace<T>& ws);

// Logits for one image. Fills the workspace caches needed by backward_sample.
template <typename T>
std::span<const T> forward_sample(const ModelArch& arch, std::span<const T> params, const Image& image,
                                  Workspace<T>& ws);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(logits) in
// ws.d_logits, using the caches of the last forward_sample call.
template <typename T>
void backward_sample(const ModelArch& arch, std::span<const T> params, Workspace<T>& ws, std::span<T> grads);

// Numerically stable cross-entropy of one sample; optionally writes
// softmax - onehot (times `scale`) into d_logits.
template <typename T>
T cross_entropy(std::span<const T> logits, int label, std::span<T> d_logits = {}, T scale = T(1));

// (weight_decay / 2) * sum of squared weights (biases excluded).
template <typename T>
T weight_decay_term(const ModelArch& arch, std::span<const T> params, double weight_decay);

// Mean cross-entropy over the batch plus the weight-decay term. When `grads`
// is non-empty it is overwritten with the exact gradient.
template <typename T>
T batch_loss(const ModelArch& arch, std::span<const T> params, std::span<const Image* const> images,
             std::span<const int> labels, double weight_decay, std::span<T> grads = {});

// Index of the largest logit; ties go to the lowest index.
template <typename T>
int argmax(std::span<const T> logits);

} // namespace cobench

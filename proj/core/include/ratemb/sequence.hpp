#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratemb/embedding.hpp"
#include "ratemb/nn.hpp"

namespace ratemb::sequence {

/// Simple recurrent cell with an output head:
///   h_t = g_h(x_t Wx + bx + h_{t-1} Wh + bh)
///   o_t = g_o(h_t Wo + bo)
struct RnnParams {
    Tensor wx;  // p x l
    Tensor bx;  // l
    Tensor wh;  // l x l
    Tensor bh;  // l
    Tensor wo;  // l x J
    Tensor bo;  // J
    nn::Activation hidden_activation = nn::Activation::tanh;
    nn::Activation output_activation = nn::Activation::identity;

    std::size_t input_dim() const { return wx.dim(0); }
    std::size_t state_dim() const { return wx.dim(1); }
    std::size_t output_dim() const { return wo.dim(1); }

    /// Throws ShapeError if the six tensors disagree.
    void validate() const;

    /// All-zero parameters of the given sizes.
    static RnnParams zeros(std::size_t p, std::size_t l, std::size_t j);
    /// Uniform on +-1/sqrt(fan_in) per tensor.
    static RnnParams random(std::size_t p, std::size_t l, std::size_t j, SeededRng& rng);

    /// Tensors in a fixed order (wx, bx, wh, bh, wo, bo).
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
};

/// Ordered observations x_1..x_T, all of the same length p, T >= 1.
struct Sequence {
    std::vector<std::vector<double>> steps;

    std::size_t length() const { return steps.size(); }
    /// Throws ArgumentError on an empty sequence or ragged steps.
    void validate() const;
};

std::vector<double> rnn_step(std::span<const double> x, std::span<const double> h_prev, const RnnParams& params);

struct RnnTrace {
    std::vector<std::vector<double>> hidden;   // h_1..h_T
    std::vector<std::vector<double>> outputs;  // o_1..o_T
};

RnnTrace rnn_forward(const Sequence& seq, const RnnParams& params, std::span<const double> h0);

/// h_T with h_0 = 0; length l regardless of T.
std::vector<double> sequence_embed(const Sequence& seq, const RnnParams& params);

/// Loss on the final output o_T only.
double rnn_loss(const Sequence& seq, std::span<const double> target, const RnnParams& params, nn::LossKind loss);

/// Backpropagation through time for the final-output loss. The result has
/// the shapes of params.
RnnParams rnn_gradient(const Sequence& seq, std::span<const double> target, const RnnParams& params,
                       nn::LossKind loss);

/// Same relative-error measure as nn::grad_check, over all six tensors.
double rnn_grad_check(const Sequence& seq, std::span<const double> target, const RnnParams& params,
                      nn::LossKind loss, double epsilon = 1e-5);

struct ManyToOneOptions {
    std::size_t state_dim = 8;
    std::size_t output_dim = 1;
    nn::LossKind loss = nn::LossKind::binary_cross_entropy;
    /// Rescales the batch gradient when its global norm exceeds this; 0 disables.
    double clip_norm = 0.0;
};

struct ManyToOneResult {
    RnnParams params;
    std::vector<double> loss_history;
};

/// Trains on full sequences, one label vector per sequence. Cross-entropy
/// uses a sigmoid head and needs labels in {0, 1}; squared error uses an
/// identity head. batch_size counts sequences.
ManyToOneResult many_to_one_fit(std::span<const Sequence> seqs, std::span<const std::vector<double>> labels,
                                const nn::TrainConfig& cfg, const ManyToOneOptions& opts = {});

/// Final output o_T.
std::vector<double> rnn_predict(const Sequence& seq, const RnnParams& params);

EmbeddingTable embed_sequences(std::span<const Sequence> seqs, const RnnParams& params,
                               std::span<const std::string> ids = {});

/// One record per line: steps separated by ';', components by ',', optional
/// trailing "|label" (labels may themselves be comma separated).
struct SequenceDataset {
    std::vector<std::string> ids;
    std::vector<Sequence> sequences;
    std::vector<std::optional<std::vector<double>>> labels;
};

SequenceDataset read_sequences(std::istream& is);
SequenceDataset read_sequences(const std::string& path);
void write_sequences(const SequenceDataset& data, std::ostream& os);

void save_rnn(const RnnParams& params, std::ostream& os);
RnnParams load_rnn(std::istream& is);

}  // namespace ratemb::sequence

#pragma once

#include <string>
#include <vector>

#include "notesurv/autodiff.hpp"
#include "notesurv/preprocess.hpp"

namespace notesurv {

struct EncoderConfig {
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t d_model = 64;
    std::size_t max_len = 128;
    double dropout = 0.1;
    ad::Activation act = ad::Activation::relu;

    std::size_t head_dim() const;  // d_model / heads, exact division
    void validate() const;
};

// Attention weights for one encoded note, trimmed to the non-padding prefix.
// weights[layer][head] is a valid_len x valid_len row-major matrix whose rows
// (queries) sum to 1 over the valid keys.
struct AttentionDump {
    std::string note_id;
    std::vector<std::string> tokens;
    std::vector<std::vector<std::vector<double>>> weights;

    bool empty() const { return weights.empty(); }
};

// Parameter names take a prefix (default "enc.") so one ParamStore can hold
// the encoder next to the feed-forward head.
void init_encoder_params(ad::ParamStore& params, const EncoderConfig& cfg,
                         std::size_t vocab_size, Rng& rng,
                         const std::string& prefix = "enc.");

// row i = token[id_i] + position[i] + segment[seg_i]
ad::NodeId embed(ad::Tape& tape, const std::vector<int>& ids,
                 const std::vector<int>& segments, const EncoderConfig& cfg,
                 std::size_t vocab_size, const std::string& prefix = "enc.");

// weights = softmax over keys of Q K^T / sqrt(d_k), masked keys get weight
// exactly 0; output = weights * V
std::pair<ad::NodeId, ad::NodeId> scaled_dot_attention(
    ad::Tape& tape, ad::NodeId q, ad::NodeId k, ad::NodeId v,
    const std::vector<std::uint8_t>* key_mask);

// head_i = attention(X Wq_i, X Wk_i, X Wv_i); concat then project by Wo.
// Returns the projected output and the per-head weight nodes.
std::pair<ad::NodeId, std::vector<ad::NodeId>> multi_head(
    ad::Tape& tape, ad::NodeId x, const EncoderConfig& cfg, std::size_t layer,
    const std::vector<std::uint8_t>* key_mask, const std::string& prefix = "enc.");

struct EncodeResult {
    ad::NodeId cls;  // 1 x d_model
    AttentionDump dump;
};

// Stacked blocks of {multi-head attention -> scaled residual -> position-wise
// dense + activation -> scaled residual}; dropout after each sublayer when
// training. Returns the [CLS] row (position 0) and all attention weights.
EncodeResult encode(ad::Tape& tape, const EncodedNote& note, const EncoderConfig& cfg,
                    std::size_t vocab_size, bool training, Rng& dropout_rng,
                    const std::vector<std::string>& token_labels = {},
                    const std::string& prefix = "enc.");

void dump_attention(const AttentionDump& dump, const std::string& path);
AttentionDump load_attention(const std::string& path);

}  // namespace notesurv

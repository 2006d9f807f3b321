#include "notesurv/encoder.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace notesurv {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865476;

std::string layer_key(const std::string& prefix, std::size_t layer) {
    return prefix + "l" + std::to_string(layer) + ".";
}
}  // namespace

std::size_t EncoderConfig::head_dim() const {
    if (heads == 0 || d_model % heads != 0)
        throw std::invalid_argument("EncoderConfig: d_model must divide evenly by heads");
    return d_model / heads;
}

void EncoderConfig::validate() const {
    if (layers == 0 || heads == 0 || d_model == 0 || max_len < 2)
        throw std::invalid_argument("EncoderConfig: sizes must be positive (max_len >= 2)");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("EncoderConfig: dropout must be in [0,1)");
    head_dim();
}

void init_encoder_params(ad::ParamStore& params, const EncoderConfig& cfg,
                         std::size_t vocab_size, Rng& rng, const std::string& prefix) {
    cfg.validate();
    const std::size_t dk = cfg.head_dim();
    params.add(prefix + "tok", ad::xavier_uniform(vocab_size, cfg.d_model, rng));
    params.add(prefix + "pos", ad::xavier_uniform(cfg.max_len, cfg.d_model, rng));
    params.add(prefix + "seg", ad::xavier_uniform(2, cfg.d_model, rng));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string lk = layer_key(prefix, l);
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            const std::string hk = lk + "h" + std::to_string(h) + ".";
            params.add(hk + "wq", ad::xavier_uniform(cfg.d_model, dk, rng));
            params.add(hk + "wk", ad::xavier_uniform(cfg.d_model, dk, rng));
            params.add(hk + "wv", ad::xavier_uniform(cfg.d_model, dk, rng));
        }
        params.add(lk + "wo", ad::xavier_uniform(cfg.heads * dk, cfg.d_model, rng));
        params.add(lk + "ffn.w", ad::xavier_uniform(cfg.d_model, cfg.d_model, rng));
        params.add(lk + "ffn.b", Tensor::zeros({1, cfg.d_model}));
    }
}

ad::NodeId embed(ad::Tape& tape, const std::vector<int>& ids,
                 const std::vector<int>& segments, const EncoderConfig& cfg,
                 std::size_t vocab_size, const std::string& prefix) {
    if (ids.size() != segments.size())
        throw std::invalid_argument("embed: ids/segments length mismatch");
    if (ids.size() > cfg.max_len)
        throw std::invalid_argument("embed: sequence longer than max_len");
    std::vector<std::size_t> tok_rows, pos_rows, seg_rows;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab_size)
            throw std::out_of_range("embed: token id " + std::to_string(ids[i]) +
                                    " out of vocabulary range");
        if (segments[i] < 0 || segments[i] > 1)
            throw std::out_of_range("embed: segment id must be 0 or 1");
        tok_rows.push_back(static_cast<std::size_t>(ids[i]));
        pos_rows.push_back(i);
        seg_rows.push_back(static_cast<std::size_t>(segments[i]));
    }
    ad::NodeId tok = tape.gather_rows(tape.param(prefix + "tok"), tok_rows);
    ad::NodeId pos = tape.gather_rows(tape.param(prefix + "pos"), pos_rows);
    ad::NodeId seg = tape.gather_rows(tape.param(prefix + "seg"), seg_rows);
    return tape.add(tape.add(tok, pos), seg);
}

std::pair<ad::NodeId, ad::NodeId> scaled_dot_attention(
    ad::Tape& tape, ad::NodeId q, ad::NodeId k, ad::NodeId v,
    const std::vector<std::uint8_t>* key_mask) {
    const Tensor& tq = tape.value(q);
    const Tensor& tk = tape.value(k);
    const Tensor& tv = tape.value(v);
    if (tq.cols() != tk.cols())
        throw std::invalid_argument("scaled_dot_attention: Q/K width mismatch");
    if (tq.rows() != tk.rows() || tk.rows() != tv.rows())
        throw std::invalid_argument("scaled_dot_attention: sequence length mismatch");
    const double dk = static_cast<double>(tq.cols());
    ad::NodeId scores = tape.scale(tape.matmul(q, tape.transpose(k)), 1.0 / std::sqrt(dk));
    ad::NodeId weights = tape.softmax_rows(scores, key_mask);
    ad::NodeId out = tape.matmul(weights, v);
    return {out, weights};
}

std::pair<ad::NodeId, std::vector<ad::NodeId>> multi_head(
    ad::Tape& tape, ad::NodeId x, const EncoderConfig& cfg, std::size_t layer,
    const std::vector<std::uint8_t>* key_mask, const std::string& prefix) {
    if (tape.value(x).cols() != cfg.d_model)
        throw std::invalid_argument("multi_head: input width != d_model");
    const std::string lk = layer_key(prefix, layer);
    std::vector<ad::NodeId> heads, weights;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const std::string hk = lk + "h" + std::to_string(h) + ".";
        ad::NodeId q = tape.matmul(x, tape.param(hk + "wq"));
        ad::NodeId k = tape.matmul(x, tape.param(hk + "wk"));
        ad::NodeId v = tape.matmul(x, tape.param(hk + "wv"));
        auto [out, w] = scaled_dot_attention(tape, q, k, v, key_mask);
        heads.push_back(out);
        weights.push_back(w);
    }
    ad::NodeId cat = heads.size() == 1 ? heads[0] : tape.concat_cols(heads);
    ad::NodeId projected = tape.matmul(cat, tape.param(lk + "wo"));
    return {projected, weights};
}

EncodeResult encode(ad::Tape& tape, const EncodedNote& note, const EncoderConfig& cfg,
                    std::size_t vocab_size, bool training, Rng& dropout_rng,
                    const std::vector<std::string>& token_labels,
                    const std::string& prefix) {
    cfg.validate();
    if (note.ids.empty()) throw std::invalid_argument("encode: empty note encoding");
    std::vector<int> segments(note.ids.size(), 0);  // single-note input
    ad::NodeId x = embed(tape, note.ids, segments, cfg, vocab_size, prefix);

    AttentionDump dump;
    dump.tokens = token_labels;

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        auto [attn, head_weights] = multi_head(tape, x, cfg, l, &note.mask, prefix);
        attn = tape.dropout(attn, cfg.dropout, training, dropout_rng);
        x = tape.scale(tape.add(x, attn), kInvSqrt2);

        const std::string lk = layer_key(prefix, l);
        ad::NodeId ffn = tape.activation(
            tape.add(tape.matmul(x, tape.param(lk + "ffn.w")), tape.param(lk + "ffn.b")),
            cfg.act);
        ffn = tape.dropout(ffn, cfg.dropout, training, dropout_rng);
        x = tape.scale(tape.add(x, ffn), kInvSqrt2);

        dump.weights.emplace_back();
        for (ad::NodeId w : head_weights) {
            const Tensor& tw = tape.value(w);
            std::vector<double> trimmed;
            trimmed.reserve(note.valid_len * note.valid_len);
            for (std::size_t r = 0; r < note.valid_len; ++r)
                for (std::size_t c = 0; c < note.valid_len; ++c)
                    trimmed.push_back(tw.at(r, c));
            dump.weights.back().push_back(std::move(trimmed));
        }
    }

    EncodeResult res{tape.gather_rows(x, {0}), std::move(dump)};
    return res;
}

void dump_attention(const AttentionDump& dump, const std::string& path) {
    if (dump.empty()) throw std::invalid_argument("dump_attention: empty dump");
    nlohmann::json j;
    j["note_id"] = dump.note_id;
    j["tokens"] = dump.tokens;
    nlohmann::json layers = nlohmann::json::array();
    const std::size_t len = dump.tokens.size();
    for (std::size_t l = 0; l < dump.weights.size(); ++l) {
        nlohmann::json heads = nlohmann::json::array();
        for (std::size_t h = 0; h < dump.weights[l].size(); ++h) {
            const auto& flat = dump.weights[l][h];
            nlohmann::json rows = nlohmann::json::array();
            for (std::size_t r = 0; r < len; ++r) {
                nlohmann::json row = nlohmann::json::array();
                for (std::size_t c = 0; c < len; ++c) row.push_back(flat[r * len + c]);
                rows.push_back(row);
            }
            heads.push_back({{"head", h}, {"weights", rows}});
        }
        layers.push_back({{"layer", l}, {"heads", heads}});
    }
    j["layers"] = layers;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dump_attention: cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("dump_attention: write failed for " + path);
}

AttentionDump load_attention(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_attention: cannot open " + path);
    nlohmann::json j;
    in >> j;
    AttentionDump dump;
    dump.note_id = j.at("note_id").get<std::string>();
    dump.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& layer : j.at("layers")) {
        dump.weights.emplace_back();
        for (const auto& head : layer.at("heads")) {
            std::vector<double> flat;
            for (const auto& row : head.at("weights"))
                for (const auto& x : row) flat.push_back(x.get<double>());
            dump.weights.back().push_back(std::move(flat));
        }
    }
    return dump;
}

}  // namespace notesurv

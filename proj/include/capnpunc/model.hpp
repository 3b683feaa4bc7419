// Copyright 2026 The capnpunc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capnpunc/bpe.hpp"
#include "capnpunc/corpus.hpp"
#include "capnpunc/error.hpp"
#include "capnpunc/rng.hpp"
#include "capnpunc/tensor.hpp"

namespace capnpunc {

// Model wirings: the full joint model, the two single-task baselines, the
// punctuation-conditioned joint baseline, and the three ablations.
enum class Variant {
    kJoint,
    kSingleCap,
    kSinglePunc,
    kPuncFirst,
    kNoCapFeature,
    kSoftmaxDecoder,
    kStaticEmbedding,
};

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::kJoint:
            return "JOINT";
        case Variant::kSingleCap:
            return "SINGLE_CAP";
        case Variant::kSinglePunc:
            return "SINGLE_PUNC";
        case Variant::kPuncFirst:
            return "PUNC_FIRST";
        case Variant::kNoCapFeature:
            return "NO_CAP_FEATURE";
        case Variant::kSoftmaxDecoder:
            return "SOFTMAX_DECODER";
        case Variant::kStaticEmbedding:
            return "STATIC_EMBEDDING";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& name) {
    for (Variant v :
         {Variant::kJoint, Variant::kSingleCap, Variant::kSinglePunc, Variant::kPuncFirst,
          Variant::kNoCapFeature, Variant::kSoftmaxDecoder, Variant::kStaticEmbedding})
        if (name == variant_name(v)) return v;
    throw ConfigError(
        "unknown variant '" + name +
        "' (expected JOINT, SINGLE_CAP, SINGLE_PUNC, PUNC_FIRST, NO_CAP_FEATURE, "
        "SOFTMAX_DECODER or STATIC_EMBEDDING)");
}

struct ModelConfig {
    int vocab_size = 0;     // set from the trained subword vocabulary
    int embed_dim = 64;     // word/subword representation width
    int layers = 2;
    int heads = 4;
    int ffn_hidden = 256;
    int softcap_dim = 256;  // soft capitalization feature width
    int cap_labels = kNumCapLabels;
    int punc_labels = kNumPuncLabels;
    int max_positions = 512;
    double lambda = 0.15;   // cap/punc loss mixture weight
    double dropout = 0.0;   // disabled by default for determinism
    Variant variant = Variant::kJoint;

    void validate() const {
        auto need = [](bool ok, const std::string& msg) {
            if (!ok) throw ConfigError("model config: " + msg);
        };
        need(vocab_size >= 2, "vocab_size must be >= 2");
        need(embed_dim >= 1, "embed_dim must be >= 1");
        need(layers >= 1 || variant == Variant::kStaticEmbedding, "layers must be >= 1");
        need(heads >= 1, "heads must be >= 1");
        need(embed_dim % heads == 0, "heads must divide embed_dim");
        need(ffn_hidden >= 1, "ffn_hidden must be >= 1");
        need(softcap_dim >= 1, "softcap_dim must be >= 1");
        need(cap_labels == kNumCapLabels, "cap_labels must be 3");
        need(punc_labels == kNumPuncLabels, "punc_labels must be 4");
        need(max_positions >= 1, "max_positions must be >= 1");
        need(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0,1]");
        need(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0,1)");
    }

    bool has_cap_head() const { return variant != Variant::kSinglePunc; }
    bool has_punc_head() const { return variant != Variant::kSingleCap; }
    bool has_soft_cap() const {
        return variant == Variant::kJoint || variant == Variant::kSoftmaxDecoder ||
               variant == Variant::kStaticEmbedding;
    }
    bool has_crf() const {
        return variant == Variant::kJoint || variant == Variant::kSinglePunc ||
               variant == Variant::kNoCapFeature || variant == Variant::kStaticEmbedding;
    }
    bool has_encoder_stack() const { return variant != Variant::kStaticEmbedding; }
    bool is_joint() const { return has_cap_head() && has_punc_head(); }

    int punc_in_dim() const { return embed_dim + (has_soft_cap() ? softcap_dim : 0); }
    int cap_in_dim() const {
        return embed_dim + (variant == Variant::kPuncFirst ? punc_labels : 0);
    }
};

// All learned parameters of one model instance, in a fixed registration
// order. Initialization draws from the run RNG in that order: linear and
// embedding weights ~ N(0, 0.02), layer-norm gains 1, everything else 0.
template <typename Real>
class Model {
   public:
    struct LayerParams {
        int wq, bq, wk, bk, wv, bv, wo, bo;
        int ln1_g, ln1_b;
        int w1, b1, w2, b2;
        int ln2_g, ln2_b;
    };

    ModelConfig config;

    explicit Model(ModelConfig cfg) : config(cfg) {
        config.validate();
        build();
    }

    Model(ModelConfig cfg, Rng& rng) : Model(cfg) { init(rng); }

    std::vector<Parameter<Real>>& params() { return params_; }
    const std::vector<Parameter<Real>>& params() const { return params_; }

    Parameter<Real>& param(int idx) { return params_[idx]; }
    const Parameter<Real>& param(int idx) const { return params_[idx]; }

    Parameter<Real>* find(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return &p;
        return nullptr;
    }

    void zero_grads() {
        for (auto& p : params_) p.zero_grad();
    }

    std::vector<Tensor<Real>> snapshot() const {
        std::vector<Tensor<Real>> values;
        values.reserve(params_.size());
        for (const auto& p : params_) values.push_back(p.value);
        return values;
    }

    void load_snapshot(const std::vector<Tensor<Real>>& values) {
        if (values.size() != params_.size())
            throw NumericError("model snapshot size mismatch");
        for (size_t i = 0; i < params_.size(); ++i) params_[i].value = values[i];
    }

    // Parameter handles; -1 when the variant omits the block.
    int tok_emb = -1, pos_emb = -1;
    std::vector<LayerParams> layer_params;
    int cap_w = -1, cap_b = -1;
    int softcap_w = -1;
    int punc_w = -1, punc_b = -1;
    int crf_trans = -1, crf_start = -1, crf_stop = -1;

   private:
    int add(const std::string& name, std::vector<int> shape, bool decay) {
        params_.emplace_back(name, Tensor<Real>::zeros(std::move(shape)), decay);
        return static_cast<int>(params_.size()) - 1;
    }

    void build() {
        const ModelConfig& c = config;
        tok_emb = add("tok_emb", {c.vocab_size, c.embed_dim}, true);
        if (c.has_encoder_stack()) {
            pos_emb = add("pos_emb", {c.max_positions, c.embed_dim}, true);
            for (int l = 0; l < c.layers; ++l) {
                std::string p = "enc" + std::to_string(l) + ".";
                LayerParams lp;
                lp.wq = add(p + "attn.wq", {c.embed_dim, c.embed_dim}, true);
                lp.bq = add(p + "attn.bq", {c.embed_dim}, false);
                lp.wk = add(p + "attn.wk", {c.embed_dim, c.embed_dim}, true);
                lp.bk = add(p + "attn.bk", {c.embed_dim}, false);
                lp.wv = add(p + "attn.wv", {c.embed_dim, c.embed_dim}, true);
                lp.bv = add(p + "attn.bv", {c.embed_dim}, false);
                lp.wo = add(p + "attn.wo", {c.embed_dim, c.embed_dim}, true);
                lp.bo = add(p + "attn.bo", {c.embed_dim}, false);
                lp.ln1_g = add(p + "ln1.g", {c.embed_dim}, false);
                lp.ln1_b = add(p + "ln1.b", {c.embed_dim}, false);
                lp.w1 = add(p + "ffn.w1", {c.embed_dim, c.ffn_hidden}, true);
                lp.b1 = add(p + "ffn.b1", {c.ffn_hidden}, false);
                lp.w2 = add(p + "ffn.w2", {c.ffn_hidden, c.embed_dim}, true);
                lp.b2 = add(p + "ffn.b2", {c.embed_dim}, false);
                lp.ln2_g = add(p + "ln2.g", {c.embed_dim}, false);
                lp.ln2_b = add(p + "ln2.b", {c.embed_dim}, false);
                layer_params.push_back(lp);
            }
        }
        if (c.has_cap_head()) {
            cap_w = add("cap.w", {c.cap_in_dim(), c.cap_labels}, true);
            cap_b = add("cap.b", {c.cap_labels}, false);
        }
        if (c.has_soft_cap()) {
            // Row k is the feature vector selected by a one-hot probability
            // at capitalization class k.
            softcap_w = add("soft_cap.w", {c.cap_labels, c.softcap_dim}, true);
        }
        if (c.has_punc_head()) {
            punc_w = add("punc.w", {c.punc_in_dim(), c.punc_labels}, true);
            punc_b = add("punc.b", {c.punc_labels}, false);
        }
        if (c.has_crf()) {
            crf_trans = add("crf.trans", {c.punc_labels, c.punc_labels}, false);
            crf_start = add("crf.start", {c.punc_labels}, false);
            crf_stop = add("crf.stop", {c.punc_labels}, false);
        }
    }

    void init(Rng& rng) {
        const Real std02 = Real(0.02);
        for (auto& p : params_) {
            bool is_ln_gain = p.name.size() >= 2 && p.name.substr(p.name.size() - 2) == ".g" &&
                              p.name.find("ln") != std::string::npos;
            bool is_weight = p.decay;  // decay is set exactly on weight matrices/embeddings
            if (is_weight) {
                for (auto& v : p.value.values) v = Real(rng.normal()) * std02;
            } else if (is_ln_gain) {
                std::fill(p.value.values.begin(), p.value.values.end(), Real(1));
            }
            // biases and CRF transitions stay zero
        }
    }

    std::vector<Parameter<Real>> params_;
};

// ---------------------------------------------------------------------------
// Forward graph construction
// ---------------------------------------------------------------------------

template <typename Real>
struct BoundParams {
    std::vector<Node<Real>*> nodes;  // parallel to model.params()
    Node<Real>* operator[](int idx) const { return nodes[idx]; }
};

template <typename Real>
BoundParams<Real> bind_params(Tape<Real>& tape, Model<Real>& model) {
    BoundParams<Real> bound;
    bound.nodes.reserve(model.params().size());
    for (auto& p : model.params()) bound.nodes.push_back(tape.param(p));
    return bound;
}

// Subword expansion: flat id list plus the [begin, end) subword span of each
// word.
template <typename Real>
std::vector<int> subword_ids(const SubwordVocab& vocab, const std::vector<std::string>& words,
                             std::vector<std::pair<int, int>>* spans) {
    std::vector<int> ids;
    spans->clear();
    for (const std::string& w : words) {
        std::vector<int> wi = vocab.encode_word(w);
        spans->emplace_back(static_cast<int>(ids.size()),
                            static_cast<int>(ids.size() + wi.size()));
        ids.insert(ids.end(), wi.begin(), wi.end());
    }
    return ids;
}

// Word representations e_1..e_n: subword embeddings (+ positions) through the
// encoder stack, then per-word sum pooling. STATIC_EMBEDDING skips positions
// and attention entirely.
template <typename Real>
Node<Real>* encode_words(Tape<Real>& tape, Model<Real>& model, const BoundParams<Real>& pn,
                         const SubwordVocab& vocab, const std::vector<std::string>& words,
                         bool training, Rng& rng) {
    const ModelConfig& cfg = model.config;
    if (words.empty()) throw std::invalid_argument("encode: empty word sequence");
    std::vector<std::pair<int, int>> spans;
    std::vector<int> ids = subword_ids<Real>(vocab, words, &spans);
    if (static_cast<int>(ids.size()) > cfg.max_positions)
        throw DataError("encode: " + std::to_string(ids.size()) + " subwords exceed " +
                        std::to_string(cfg.max_positions) + " positions (" +
                        std::to_string(words.size()) + " words)");

    Node<Real>* h = tape.gather_rows(pn[model.tok_emb], ids);
    if (cfg.has_encoder_stack()) {
        std::vector<int> positions(ids.size());
        for (size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
        h = tape.add(h, tape.gather_rows(pn[model.pos_emb], positions));

        int head_dim = cfg.embed_dim / cfg.heads;
        Real inv_sqrt = Real(1) / std::sqrt(static_cast<Real>(head_dim));
        Real drop = training ? static_cast<Real>(cfg.dropout) : Real(0);
        for (const auto& lp : model.layer_params) {
            Node<Real>* q = tape.add_rowvec(tape.matmul(h, pn[lp.wq]), pn[lp.bq]);
            Node<Real>* k = tape.add_rowvec(tape.matmul(h, pn[lp.wk]), pn[lp.bk]);
            Node<Real>* v = tape.add_rowvec(tape.matmul(h, pn[lp.wv]), pn[lp.bv]);
            std::vector<Node<Real>*> heads;
            for (int hd = 0; hd < cfg.heads; ++hd) {
                int c0 = hd * head_dim, c1 = (hd + 1) * head_dim;
                Node<Real>* qh = tape.slice_cols(q, c0, c1);
                Node<Real>* kh = tape.slice_cols(k, c0, c1);
                Node<Real>* vh = tape.slice_cols(v, c0, c1);
                Node<Real>* att = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), inv_sqrt));
                att = tape.dropout(att, drop, rng);
                heads.push_back(tape.matmul(att, vh));
            }
            Node<Real>* attn_out =
                tape.add_rowvec(tape.matmul(tape.concat_cols(heads), pn[lp.wo]), pn[lp.bo]);
            attn_out = tape.dropout(attn_out, drop, rng);
            h = tape.layer_norm(tape.add(h, attn_out), pn[lp.ln1_g], pn[lp.ln1_b]);

            Node<Real>* f = tape.gelu(tape.add_rowvec(tape.matmul(h, pn[lp.w1]), pn[lp.b1]));
            f = tape.add_rowvec(tape.matmul(f, pn[lp.w2]), pn[lp.b2]);
            f = tape.dropout(f, drop, rng);
            h = tape.layer_norm(tape.add(h, f), pn[lp.ln2_g], pn[lp.ln2_b]);
        }
    }
    return tape.sum_rows_segments(h, spans);
}

// CRF negative log likelihood of one label path: logZ via the forward
// recursion in log space minus the scored path (start + emissions +
// transitions + stop).
template <typename Real>
Node<Real>* crf_nll_node(Tape<Real>& tape, Node<Real>* emissions, Node<Real>* trans,
                         Node<Real>* start, Node<Real>* stop, const std::vector<int>& labels) {
    int n = emissions->rows();
    if (n == 0 || labels.empty()) throw std::invalid_argument("crf_nll: empty sequence");
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("crf_nll: emissions " + shape_str(emissions->shape) + " vs " +
                                    std::to_string(labels.size()) + " labels");

    Node<Real>* alpha = tape.add(start, tape.row(emissions, 0));
    for (int t = 1; t < n; ++t) {
        // scores[j][y] = alpha[j] + trans[j][y]; reduce over j.
        Node<Real>* scores = tape.add_colvec(trans, alpha);
        alpha = tape.add(tape.logsumexp_axis(scores, 0), tape.row(emissions, t));
    }
    Node<Real>* log_z = tape.logsumexp(tape.add(alpha, stop));

    std::vector<int> rows(n);
    for (int t = 0; t < n; ++t) rows[t] = t;
    Node<Real>* path = tape.sum(tape.pick(emissions, rows, labels));
    path = tape.add(path, tape.pick(start, {labels.front()}));
    path = tape.add(path, tape.pick(stop, {labels.back()}));
    if (n > 1) {
        std::vector<int> from(labels.begin(), labels.end() - 1);
        std::vector<int> to(labels.begin() + 1, labels.end());
        path = tape.add(path, tape.sum(tape.pick(trans, from, to)));
    }
    return tape.add(log_z, tape.scale(path, Real(-1)));
}

// Exact max-score decoding. Ties take the lowest label index at the latest
// differing position: argmax scans keep the first (smallest) index, and the
// backtrace fixes later positions first.
template <typename Real>
std::pair<std::vector<int>, Real> crf_viterbi(const Tensor<Real>& emissions,
                                              const Tensor<Real>& trans,
                                              const Tensor<Real>& start,
                                              const Tensor<Real>& stop) {
    int n = emissions.rows(), m = emissions.shape[1];
    if (n < 1) throw std::invalid_argument("crf_viterbi: empty sequence");
    std::vector<std::vector<Real>> delta(n, std::vector<Real>(m));
    std::vector<std::vector<int>> back(n, std::vector<int>(m, 0));
    for (int y = 0; y < m; ++y) delta[0][y] = start.values[y] + emissions.at(0, y);
    for (int t = 1; t < n; ++t)
        for (int y = 0; y < m; ++y) {
            Real best = delta[t - 1][0] + trans.at(0, y);
            int arg = 0;
            for (int j = 1; j < m; ++j) {
                Real s = delta[t - 1][j] + trans.at(j, y);
                if (s > best) {
                    best = s;
                    arg = j;
                }
            }
            delta[t][y] = best + emissions.at(t, y);
            back[t][y] = arg;
        }
    Real best = delta[n - 1][0] + stop.values[0];
    int arg = 0;
    for (int y = 1; y < m; ++y) {
        Real s = delta[n - 1][y] + stop.values[y];
        if (s > best) {
            best = s;
            arg = y;
        }
    }
    std::vector<int> path(n);
    path[n - 1] = arg;
    for (int t = n - 1; t > 0; --t) path[t - 1] = back[t][path[t]];
    return {path, best};
}

// One segment's forward graph: representations, both heads as the variant
// wires them, and (when labels are supplied) both loss nodes.
template <typename Real>
struct SegmentGraph {
    Node<Real>* word_repr = nullptr;      // n x embed_dim
    Node<Real>* cap_logits = nullptr;
    Node<Real>* cap_probs = nullptr;      // n x 3
    Node<Real>* punc_emissions = nullptr; // n x 4
    Node<Real>* cap_loss = nullptr;       // mean token cross entropy
    Node<Real>* punc_loss = nullptr;      // CRF NLL or mean token cross entropy
    int n_words = 0;
};

template <typename Real>
SegmentGraph<Real> forward_segment(Tape<Real>& tape, Model<Real>& model,
                                   const BoundParams<Real>& pn, const SubwordVocab& vocab,
                                   const std::vector<std::string>& words,
                                   const std::vector<int>* cap_labels,
                                   const std::vector<int>* punc_labels, bool training,
                                   Rng& rng) {
    const ModelConfig& cfg = model.config;
    SegmentGraph<Real> g;
    g.n_words = static_cast<int>(words.size());
    g.word_repr = encode_words(tape, model, pn, vocab, words, training, rng);

    Node<Real>* punc_probs_first = nullptr;
    if (cfg.has_punc_head() && cfg.variant == Variant::kPuncFirst) {
        g.punc_emissions =
            tape.add_rowvec(tape.matmul(g.word_repr, pn[model.punc_w]), pn[model.punc_b]);
        punc_probs_first = tape.softmax_rows(g.punc_emissions);
    }

    if (cfg.has_cap_head()) {
        Node<Real>* cap_in = g.word_repr;
        if (cfg.variant == Variant::kPuncFirst)
            cap_in = tape.concat_cols(g.word_repr, punc_probs_first);
        g.cap_logits = tape.add_rowvec(tape.matmul(cap_in, pn[model.cap_w]), pn[model.cap_b]);
        g.cap_probs = tape.softmax_rows(g.cap_logits);
    }

    if (cfg.has_punc_head() && cfg.variant != Variant::kPuncFirst) {
        Node<Real>* punc_in = g.word_repr;
        if (cfg.has_soft_cap()) {
            Node<Real>* soft = tape.matmul(g.cap_probs, pn[model.softcap_w]);
            punc_in = tape.concat_cols(g.word_repr, soft);
        }
        g.punc_emissions = tape.add_rowvec(tape.matmul(punc_in, pn[model.punc_w]),
                                           pn[model.punc_b]);
    }

    if (cap_labels && cfg.has_cap_head()) g.cap_loss = tape.cross_entropy(g.cap_logits, *cap_labels);
    if (punc_labels && cfg.has_punc_head()) {
        if (cfg.has_crf())
            g.punc_loss = crf_nll_node(tape, g.punc_emissions, pn[model.crf_trans],
                                       pn[model.crf_start], pn[model.crf_stop], *punc_labels);
        else
            g.punc_loss = tape.cross_entropy(g.punc_emissions, *punc_labels);
    }
    return g;
}

// Decoded labels for one segment; no gradients recorded.
struct SegmentPrediction {
    std::vector<int> cap;
    std::vector<int> punc;
};

template <typename Real>
SegmentPrediction predict_segment(Model<Real>& model, const SubwordVocab& vocab,
                                  const std::vector<std::string>& words) {
    Tape<Real> tape;
    Rng no_rng(0);  // dropout is off outside training
    BoundParams<Real> pn = bind_params(tape, model);
    SegmentGraph<Real> g =
        forward_segment(tape, model, pn, vocab, words, nullptr, nullptr, false, no_rng);

    SegmentPrediction pred;
    int n = g.n_words;
    if (g.cap_probs) {
        pred.cap.resize(n);
        for (int i = 0; i < n; ++i) {
            int arg = 0;
            for (int j = 1; j < model.config.cap_labels; ++j)
                if (g.cap_probs->v(i, j) > g.cap_probs->v(i, arg)) arg = j;
            pred.cap[i] = arg;
        }
    }
    if (g.punc_emissions) {
        if (model.config.has_crf()) {
            pred.punc = crf_viterbi(g.punc_emissions->to_tensor(),
                                    model.param(model.crf_trans).value,
                                    model.param(model.crf_start).value,
                                    model.param(model.crf_stop).value)
                            .first;
        } else {
            pred.punc.resize(n);
            for (int i = 0; i < n; ++i) {
                int arg = 0;
                for (int j = 1; j < model.config.punc_labels; ++j)
                    if (g.punc_emissions->v(i, j) > g.punc_emissions->v(i, arg)) arg = j;
                pred.punc[i] = arg;
            }
        }
    }
    return pred;
}

}  // namespace capnpunc

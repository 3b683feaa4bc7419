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

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "capnpunc/corpus.hpp"
#include "capnpunc/eval.hpp"
#include "capnpunc/model.hpp"

namespace capnpunc {

struct TrainConfig {
    double lr = 5e-5;
    double lambda = 0.15;
    int batch_size = 32;
    int epochs = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-2;  // decoupled; 0 disables
    double grad_clip = 0.0;      // global norm; 0 disables
    uint64_t seed = 0;

    void validate() const {
        auto need = [](bool ok, const std::string& msg) {
            if (!ok) throw ConfigError("train config: " + msg);
        };
        need(lr > 0.0, "lr must be positive");
        need(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0,1]");
        need(batch_size >= 1, "batch_size must be >= 1");
        need(epochs >= 1, "epochs must be >= 1");
        need(beta1 >= 0.0 && beta1 < 1.0, "beta1 must be in [0,1)");
        need(beta2 >= 0.0 && beta2 < 1.0, "beta2 must be in [0,1)");
        need(epsilon > 0.0, "epsilon must be positive");
        need(weight_decay >= 0.0, "weight_decay must be >= 0");
        need(grad_clip >= 0.0, "grad_clip must be >= 0");
    }
};

// Mixture objective: lambda * cap + (1 - lambda) * punc.
inline double joint_loss(double cap_loss, double punc_loss, double lambda) {
    return lambda * cap_loss + (1.0 - lambda) * punc_loss;
}

// AdamW with decoupled weight decay. Moment buffers are allocated once; a
// step first validates every gradient and rejects the whole update on any
// non-finite entry, naming the parameter.
template <typename Real>
class AdamW {
   public:
    AdamW(std::vector<Parameter<Real>>& params, const TrainConfig& cfg)
        : params_(params), cfg_(cfg) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const auto& p : params) {
            m_.emplace_back(p.value.numel(), Real(0));
            v_.emplace_back(p.value.numel(), Real(0));
        }
    }

    long step_count() const { return step_; }

    size_t state_size() const {
        size_t total = 0;
        for (const auto& m : m_) total += m.size();
        for (const auto& v : v_) total += v.size();
        return total;
    }

    void step() {
        for (const auto& p : params_)
            for (Real g : p.grad.values)
                if (!std::isfinite(static_cast<double>(g)))
                    throw NumericError("adamw: non-finite gradient in " + p.name);

        Real clip_scale = Real(1);
        if (cfg_.grad_clip > 0.0) {
            double sq = 0.0;
            for (const auto& p : params_)
                for (Real g : p.grad.values) sq += static_cast<double>(g) * static_cast<double>(g);
            double norm = std::sqrt(sq);
            if (norm > cfg_.grad_clip) clip_scale = static_cast<Real>(cfg_.grad_clip / norm);
        }

        ++step_;
        const Real lr = static_cast<Real>(cfg_.lr);
        const Real b1 = static_cast<Real>(cfg_.beta1);
        const Real b2 = static_cast<Real>(cfg_.beta2);
        const Real eps = static_cast<Real>(cfg_.epsilon);
        const Real wd = static_cast<Real>(cfg_.weight_decay);
        const Real bc1 = Real(1) - static_cast<Real>(std::pow(cfg_.beta1, step_));
        const Real bc2 = Real(1) - static_cast<Real>(std::pow(cfg_.beta2, step_));

        for (size_t pi = 0; pi < params_.size(); ++pi) {
            Parameter<Real>& p = params_[pi];
            const bool decay = p.decay && wd > Real(0);
            for (size_t i = 0; i < p.value.numel(); ++i) {
                Real g = p.grad.values[i] * clip_scale;
                Real& m = m_[pi][i];
                Real& v = v_[pi][i];
                m = b1 * m + (Real(1) - b1) * g;
                v = b2 * v + (Real(1) - b2) * g * g;
                Real m_hat = m / bc1;
                Real v_hat = v / bc2;
                Real update = m_hat / (std::sqrt(v_hat) + eps);
                if (decay) update += wd * p.value.values[i];
                p.value.values[i] -= lr * update;
            }
        }
    }

   private:
    std::vector<Parameter<Real>>& params_;
    TrainConfig cfg_;
    long step_ = 0;
    std::vector<std::vector<Real>> m_, v_;
};

// Highest average wins; ties go to the earlier epoch.
inline size_t select_best_epoch(const std::vector<double>& epoch_averages) {
    size_t best = 0;
    for (size_t i = 1; i < epoch_averages.size(); ++i)
        if (epoch_averages[i] > epoch_averages[best]) best = i;
    return best;
}

// Decodes every segment and scores both tasks (those the variant predicts).
template <typename Real>
EvalReport evaluate_model(Model<Real>& model, const SubwordVocab& vocab,
                          const std::vector<Segment>& segments) {
    const ModelConfig& cfg = model.config;
    LabelCounts cap_counts(cfg.cap_labels);
    LabelCounts punc_counts(cfg.punc_labels);
    EvalReport report;
    for (const Segment& seg : segments) {
        std::vector<std::string> words;
        std::vector<int> cap_gold, punc_gold;
        for (const auto& tok : seg.tokens) {
            words.push_back(tok.text);
            cap_gold.push_back(static_cast<int>(tok.cap));
            punc_gold.push_back(static_cast<int>(tok.punc));
        }
        report.tokens += static_cast<long>(words.size());
        if (words.empty()) continue;
        SegmentPrediction pred = predict_segment(model, vocab, words);
        if (!pred.cap.empty()) cap_counts += count_labels(cap_gold, pred.cap, cfg.cap_labels);
        if (!pred.punc.empty()) punc_counts += count_labels(punc_gold, pred.punc, cfg.punc_labels);
    }
    if (cfg.has_cap_head())
        report.cap = score_task(cap_counts, {"NONE", "CAP", "ALLCAP"});
    if (cfg.has_punc_head())
        report.punc = score_task(punc_counts, {"O", "COMMA", "PERIOD", "QMARK"});
    return report;
}

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double cap_loss = 0.0;
    double punc_loss = 0.0;
    double val_cap_p = 0.0, val_cap_r = 0.0, val_cap_f1 = 0.0;
    double val_punc_p = 0.0, val_punc_r = 0.0, val_punc_f1 = 0.0;
    double avg_f1 = 0.0;

    std::string to_line(bool has_cap, bool has_punc) const {
        std::ostringstream os;
        os << std::setprecision(6) << std::fixed;
        os << "epoch=" << epoch << " train_loss=" << train_loss;
        if (has_cap) os << " cap_loss=" << cap_loss;
        if (has_punc) os << " punc_loss=" << punc_loss;
        if (has_cap)
            os << " val_cap_p=" << val_cap_p << " val_cap_r=" << val_cap_r
               << " val_cap_f1=" << val_cap_f1;
        if (has_punc)
            os << " val_punc_p=" << val_punc_p << " val_punc_r=" << val_punc_r
               << " val_punc_f1=" << val_punc_f1;
        os << " avg_f1=" << avg_f1;
        return os.str();
    }
};

struct TrainSummary {
    std::vector<EpochMetrics> log;
    int best_epoch = 0;  // 1-based
    double best_avg_f1 = 0.0;
};

// Epoch loop: shuffle, batch, accumulate per-segment gradients sequentially,
// one optimizer step per batch. Validation runs after every epoch; the
// parameter snapshot with the best average micro-F1 is restored at the end.
template <typename Real>
TrainSummary train_model(Model<Real>& model, const SubwordVocab& vocab,
                         const std::vector<Segment>& train_segs,
                         const std::vector<Segment>& valid_segs, const TrainConfig& cfg,
                         Rng& rng, std::ostream* log_out = nullptr) {
    cfg.validate();
    if (train_segs.empty()) throw DataError("train: empty training split");
    if (valid_segs.empty()) throw DataError("train: empty validation split");
    const ModelConfig& mc = model.config;
    const bool has_cap = mc.has_cap_head();
    const bool has_punc = mc.has_punc_head();
    const Real lambda = static_cast<Real>(cfg.lambda);

    AdamW<Real> opt(model.params(), cfg);
    std::vector<size_t> order(train_segs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainSummary summary;
    std::vector<Tensor<Real>> best_snapshot = model.snapshot();
    std::vector<double> averages;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_cap_sum = 0.0;   // token cross entropy, summed over tokens
        double epoch_punc_sum = 0.0;  // NLL (or token CE mean), summed over segments
        long epoch_tokens = 0;
        long epoch_segments = 0;
        double epoch_total = 0.0;
        long batches = 0;

        for (size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            long batch_tokens = 0;
            for (size_t i = b0; i < b1; ++i)
                batch_tokens += static_cast<long>(train_segs[order[i]].tokens.size());
            const Real batch_segments = static_cast<Real>(b1 - b0);

            model.zero_grads();
            double batch_loss = 0.0;
            for (size_t i = b0; i < b1; ++i) {
                const Segment& seg = train_segs[order[i]];
                std::vector<std::string> words;
                std::vector<int> cap_gold, punc_gold;
                for (const auto& tok : seg.tokens) {
                    words.push_back(tok.text);
                    cap_gold.push_back(static_cast<int>(tok.cap));
                    punc_gold.push_back(static_cast<int>(tok.punc));
                }
                Tape<Real> tape;
                BoundParams<Real> pn = bind_params(tape, model);
                SegmentGraph<Real> g =
                    forward_segment(tape, model, pn, vocab, words, has_cap ? &cap_gold : nullptr,
                                    has_punc ? &punc_gold : nullptr, true, rng);

                // Exact batch reductions via per-segment scaling: cap loss is
                // the token mean over the batch, punc loss the segment mean.
                Node<Real>* contrib = nullptr;
                const Real n_tokens = static_cast<Real>(words.size());
                if (g.cap_loss && g.punc_loss) {
                    Node<Real>* cap_part = tape.scale(
                        g.cap_loss, lambda * n_tokens / static_cast<Real>(batch_tokens));
                    Node<Real>* punc_part =
                        tape.scale(g.punc_loss, (Real(1) - lambda) / batch_segments);
                    contrib = tape.add(cap_part, punc_part);
                    epoch_cap_sum += static_cast<double>(g.cap_loss->value[0]) * words.size();
                    epoch_punc_sum += static_cast<double>(g.punc_loss->value[0]);
                } else if (g.cap_loss) {
                    contrib = tape.scale(g.cap_loss,
                                         n_tokens / static_cast<Real>(batch_tokens));
                    epoch_cap_sum += static_cast<double>(g.cap_loss->value[0]) * words.size();
                } else if (g.punc_loss) {
                    contrib = tape.scale(g.punc_loss, Real(1) / batch_segments);
                    epoch_punc_sum += static_cast<double>(g.punc_loss->value[0]);
                } else {
                    throw NumericError("train: variant produced no loss");
                }
                batch_loss += static_cast<double>(contrib->value[0]);
                tape.backward(contrib);
            }
            opt.step();
            epoch_total += batch_loss;
            ++batches;
            epoch_tokens += batch_tokens;
            epoch_segments += static_cast<long>(b1 - b0);
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = batches > 0 ? epoch_total / batches : 0.0;
        m.cap_loss = epoch_tokens > 0 ? epoch_cap_sum / epoch_tokens : 0.0;
        m.punc_loss = epoch_segments > 0 ? epoch_punc_sum / epoch_segments : 0.0;

        EvalReport val = evaluate_model(model, vocab, valid_segs);
        double f1_sum = 0.0;
        int f1_n = 0;
        if (val.cap) {
            m.val_cap_p = val.cap->micro.precision;
            m.val_cap_r = val.cap->micro.recall;
            m.val_cap_f1 = val.cap->micro.f1;
            f1_sum += m.val_cap_f1;
            ++f1_n;
        }
        if (val.punc) {
            m.val_punc_p = val.punc->micro.precision;
            m.val_punc_r = val.punc->micro.recall;
            m.val_punc_f1 = val.punc->micro.f1;
            f1_sum += m.val_punc_f1;
            ++f1_n;
        }
        m.avg_f1 = f1_n > 0 ? f1_sum / f1_n : 0.0;
        averages.push_back(m.avg_f1);
        if (select_best_epoch(averages) == averages.size() - 1)
            best_snapshot = model.snapshot();
        summary.log.push_back(m);
        if (log_out) (*log_out) << m.to_line(has_cap, has_punc) << "\n" << std::flush;
    }

    size_t best = select_best_epoch(averages);
    summary.best_epoch = static_cast<int>(best) + 1;
    summary.best_avg_f1 = averages[best];
    model.load_snapshot(best_snapshot);
    return summary;
}

}  // namespace capnpunc

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

#include "capnpunc/eval.hpp"

#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace capnpunc {

LabelCounts& LabelCounts::operator+=(const LabelCounts& other) {
    if (num_labels() != other.num_labels())
        throw std::invalid_argument("LabelCounts: label count mismatch");
    for (int i = 0; i < num_labels(); ++i) {
        tp[i] += other.tp[i];
        fp[i] += other.fp[i];
        fn[i] += other.fn[i];
    }
    return *this;
}

LabelCounts count_labels(const std::vector<int>& gold, const std::vector<int>& pred,
                         int num_labels) {
    if (gold.size() != pred.size())
        throw std::invalid_argument("count_labels: gold has " + std::to_string(gold.size()) +
                                    " labels, pred has " + std::to_string(pred.size()));
    LabelCounts counts(num_labels);
    for (size_t i = 0; i < gold.size(); ++i) {
        int g = gold[i], p = pred[i];
        if (g < 0 || g >= num_labels || p < 0 || p >= num_labels)
            throw std::invalid_argument("count_labels: label out of range");
        // Index 0 is "no mark": positions where both sides are 0 contribute
        // nothing, and class 0 itself is never counted.
        if (g == p) {
            if (g != 0) ++counts.tp[g];
        } else {
            if (p != 0) ++counts.fp[p];
            if (g != 0) ++counts.fn[g];
        }
    }
    return counts;
}

Prf prf_scores(long tp, long fp, long fn) {
    Prf s;
    s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

TaskReport score_task(const LabelCounts& counts,
                      const std::vector<std::string>& all_label_names) {
    if (static_cast<int>(all_label_names.size()) != counts.num_labels())
        throw std::invalid_argument("score_task: name/count size mismatch");
    TaskReport report;
    for (int i = 1; i < counts.num_labels(); ++i) {
        report.label_names.push_back(all_label_names[i]);
        report.per_label.push_back(prf_scores(counts.tp[i], counts.fp[i], counts.fn[i]));
        report.total_tp += counts.tp[i];
        report.total_fp += counts.fp[i];
        report.total_fn += counts.fn[i];
    }
    report.micro = prf_scores(report.total_tp, report.total_fp, report.total_fn);
    return report;
}

namespace {

void format_task_rows(std::ostringstream& os, const std::string& task, const TaskReport& t) {
    auto row = [&](const std::string& label, const Prf& s) {
        os << "  " << std::left << std::setw(12) << label << std::right << std::fixed
           << std::setprecision(4) << std::setw(10) << s.precision << std::setw(10) << s.recall
           << std::setw(10) << s.f1 << "\n";
    };
    os << task << "\n";
    os << "  " << std::left << std::setw(12) << "label" << std::right << std::setw(10)
       << "precision" << std::setw(10) << "recall" << std::setw(10) << "f1"
       << "\n";
    for (size_t i = 0; i < t.per_label.size(); ++i) row(t.label_names[i], t.per_label[i]);
    row("micro", t.micro);
}

void format_task_kv(std::ostringstream& os, const std::string& task, const TaskReport& t) {
    auto kv = [&](const std::string& label, const Prf& s) {
        os << task << "." << label << ".precision=" << s.precision << "\n";
        os << task << "." << label << ".recall=" << s.recall << "\n";
        os << task << "." << label << ".f1=" << s.f1 << "\n";
    };
    os << std::setprecision(10);
    for (size_t i = 0; i < t.per_label.size(); ++i) kv(t.label_names[i], t.per_label[i]);
    kv("micro", t.micro);
    os << task << ".tp=" << t.total_tp << "\n";
    os << task << ".fp=" << t.total_fp << "\n";
    os << task << ".fn=" << t.total_fn << "\n";
}

}  // namespace

std::string format_report_table(const EvalReport& report) {
    std::ostringstream os;
    os << "tokens: " << report.tokens << "\n";
    if (report.cap) format_task_rows(os, "capitalization", *report.cap);
    if (report.punc) format_task_rows(os, "punctuation", *report.punc);
    return os.str();
}

std::string format_report_kv(const EvalReport& report) {
    std::ostringstream os;
    os << "tokens=" << report.tokens << "\n";
    if (report.cap) format_task_kv(os, "capitalization", *report.cap);
    if (report.punc) format_task_kv(os, "punctuation", *report.punc);
    return os.str();
}

}  // namespace capnpunc

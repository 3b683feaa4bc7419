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

#include <optional>
#include <string>
#include <vector>

namespace capnpunc {

// Per-label confusion counts for one task. Index 0 is the "no mark" class
// (O / NONE); it never accumulates counts and is excluded from micro
// averaging.
struct LabelCounts {
    std::vector<long> tp, fp, fn;

    explicit LabelCounts(int num_labels = 0)
        : tp(num_labels, 0), fp(num_labels, 0), fn(num_labels, 0) {}

    int num_labels() const { return static_cast<int>(tp.size()); }

    // Additive merge (segments, shards).
    LabelCounts& operator+=(const LabelCounts& other);
};

// Tallies TP/FP/FN per mark label over aligned label sequences.
LabelCounts count_labels(const std::vector<int>& gold, const std::vector<int>& pred,
                         int num_labels);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Zero denominators score 0 by convention.
Prf prf_scores(long tp, long fp, long fn);

struct TaskReport {
    std::vector<std::string> label_names;  // mark labels only (index 0 dropped)
    std::vector<Prf> per_label;
    Prf micro;
    long total_tp = 0, total_fp = 0, total_fn = 0;
};

TaskReport score_task(const LabelCounts& counts, const std::vector<std::string>& all_label_names);

struct EvalReport {
    std::optional<TaskReport> cap;
    std::optional<TaskReport> punc;
    long tokens = 0;
};

// Aligned human-readable table: per task, per-label and micro P/R/F1.
std::string format_report_table(const EvalReport& report);

// Machine form, one key=value per line.
std::string format_report_kv(const EvalReport& report);

}  // namespace capnpunc

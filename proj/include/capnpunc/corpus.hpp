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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace capnpunc {

// Label code order is fixed everywhere: one-hot layouts, soft-cap projection
// rows and CRF transition axes all use these indices.
enum class CapLabel : int { kNone = 0, kCap = 1, kAllCap = 2 };
enum class PuncLabel : int { kO = 0, kComma = 1, kPeriod = 2, kQMark = 3 };

constexpr int kNumCapLabels = 3;
constexpr int kNumPuncLabels = 4;

const char* punc_label_name(PuncLabel p);
PuncLabel punc_label_from_name(std::string_view name);  // throws DataError
const char* cap_label_name(CapLabel c);

// Character a punctuation label restores to; '\0' for O.
char punc_label_char(PuncLabel p);

inline bool ends_sentence(PuncLabel p) {
    return p == PuncLabel::kPeriod || p == PuncLabel::kQMark;
}

struct LabeledToken {
    std::string text;  // lowercase, no kept punctuation characters
    CapLabel cap = CapLabel::kNone;
    PuncLabel punc = PuncLabel::kO;

    bool operator==(const LabeledToken&) const = default;
};

// A bounded run of tokens fed to the model as one unit. `forced` marks
// chunks produced by hard-splitting an oversized sentence; it is derived
// metadata, not persisted in the dataset format, so equality ignores it.
struct Segment {
    std::vector<LabeledToken> tokens;
    bool forced = false;

    bool ends_at_boundary() const {
        return !tokens.empty() && ends_sentence(tokens.back().punc);
    }
    bool operator==(const Segment& other) const { return tokens == other.tokens; }
};

// Capitalization label of a cased word form: ALLCAP for >= 2 cased letters
// all uppercase, CAP when the first cased letter is uppercase, else NONE.
CapLabel cap_label_of(std::string_view cased_word);

// Renders a lowercase word under a capitalization label. CAP uppercases the
// first character (whatever it is), ALLCAP uppercases every character.
std::string render_word(std::string_view lower_word, CapLabel cap);

// Cleaning + labeling: lowercases, strips punctuation except , . ? which
// become labels on the preceding word. Runs of kept marks keep the first.
// Text with no surviving content yields an empty list.
std::vector<LabeledToken> normalize_and_label(std::string_view raw);

// Greedy packing into <= max_len units that end at sentence boundaries.
// Oversized sentences are hard-split and flagged. Token order and
// multiplicity are preserved exactly.
std::vector<Segment> segment(const std::vector<LabeledToken>& tokens, int max_len = 150);

// Inverse of labeling for canonical text: applies casing, appends marks
// with no preceding space, joins with single spaces.
std::string restore(const std::vector<LabeledToken>& tokens);

struct SplitIndices {
    std::vector<size_t> train, valid, test;
};

// Document-level random partition, exact by largest-remainder apportionment,
// deterministic under seed.
SplitIndices split_corpus(size_t num_documents, const std::array<double, 3>& ratios,
                          uint64_t seed);

// Dataset file format: one `text\tcap_code\tpunc_name` line per token,
// blank line between segments, UTF-8, LF.
std::vector<Segment> read_dataset(std::istream& in, const std::string& source_name);
std::vector<Segment> read_dataset(const std::string& path);
void write_dataset(std::ostream& out, const std::vector<Segment>& segments);
void write_dataset(const std::string& path, const std::vector<Segment>& segments);

}  // namespace capnpunc

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

#include "capnpunc/corpus.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "capnpunc/error.hpp"
#include "capnpunc/rng.hpp"
#include "capnpunc/unicode.hpp"

namespace capnpunc {

namespace {

bool is_kept_punct(char32_t cp) { return cp == U',' || cp == U'.' || cp == U'?'; }

PuncLabel kept_punct_label(char32_t cp) {
    switch (cp) {
        case U',':
            return PuncLabel::kComma;
        case U'.':
            return PuncLabel::kPeriod;
        default:
            return PuncLabel::kQMark;
    }
}

}  // namespace

const char* punc_label_name(PuncLabel p) {
    switch (p) {
        case PuncLabel::kO:
            return "O";
        case PuncLabel::kComma:
            return "COMMA";
        case PuncLabel::kPeriod:
            return "PERIOD";
        case PuncLabel::kQMark:
            return "QMARK";
    }
    return "?";
}

PuncLabel punc_label_from_name(std::string_view name) {
    if (name == "O") return PuncLabel::kO;
    if (name == "COMMA") return PuncLabel::kComma;
    if (name == "PERIOD") return PuncLabel::kPeriod;
    if (name == "QMARK") return PuncLabel::kQMark;
    throw DataError("unknown punctuation label '" + std::string(name) + "'");
}

const char* cap_label_name(CapLabel c) {
    switch (c) {
        case CapLabel::kNone:
            return "NONE";
        case CapLabel::kCap:
            return "CAP";
        case CapLabel::kAllCap:
            return "ALLCAP";
    }
    return "?";
}

char punc_label_char(PuncLabel p) {
    switch (p) {
        case PuncLabel::kComma:
            return ',';
        case PuncLabel::kPeriod:
            return '.';
        case PuncLabel::kQMark:
            return '?';
        default:
            return '\0';
    }
}

CapLabel cap_label_of(std::string_view cased_word) {
    int cased_count = 0;
    int upper_count = 0;
    bool first_is_upper = false;
    for (char32_t cp : uni::decode_utf8(cased_word)) {
        if (!uni::is_cased(cp)) continue;
        if (cased_count == 0) first_is_upper = uni::is_upper(cp);
        ++cased_count;
        if (uni::is_upper(cp)) ++upper_count;
    }
    if (cased_count >= 2 && upper_count == cased_count) return CapLabel::kAllCap;
    if (cased_count >= 1 && first_is_upper) return CapLabel::kCap;
    return CapLabel::kNone;
}

std::string render_word(std::string_view lower_word, CapLabel cap) {
    std::vector<char32_t> cps = uni::decode_utf8(lower_word);
    switch (cap) {
        case CapLabel::kNone:
            break;
        case CapLabel::kCap:
            if (!cps.empty()) cps[0] = uni::to_upper(cps[0]);
            break;
        case CapLabel::kAllCap:
            for (char32_t& cp : cps) cp = uni::to_upper(cp);
            break;
    }
    return uni::encode_utf8(cps);
}

std::vector<LabeledToken> normalize_and_label(std::string_view raw) {
    std::vector<LabeledToken> tokens;
    std::vector<char32_t> word;  // original casing, cleaned

    auto flush_word = [&] {
        if (word.empty()) return;
        LabeledToken tok;
        tok.cap = cap_label_of(uni::encode_utf8(word));
        for (char32_t& cp : word) cp = uni::to_lower(cp);
        tok.text = uni::encode_utf8(word);
        tokens.push_back(std::move(tok));
        word.clear();
    };

    for (char32_t cp : uni::decode_utf8(raw)) {
        if (uni::is_space(cp)) {
            flush_word();
        } else if (is_kept_punct(cp)) {
            // The mark labels the word it follows. Within a run of kept
            // marks only the first survives.
            flush_word();
            if (!tokens.empty() && tokens.back().punc == PuncLabel::kO)
                tokens.back().punc = kept_punct_label(cp);
        } else if (uni::is_punct(cp)) {
            continue;  // removed, not remapped
        } else {
            word.push_back(cp);
        }
    }
    flush_word();
    return tokens;
}

std::vector<Segment> segment(const std::vector<LabeledToken>& tokens, int max_len) {
    if (max_len < 1) throw std::invalid_argument("segment: max_len must be >= 1");

    // Sentences: runs ending at PERIOD/QMARK, plus a trailing unterminated run.
    std::vector<std::pair<size_t, size_t>> sentences;
    size_t start = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (ends_sentence(tokens[i].punc)) {
            sentences.emplace_back(start, i + 1);
            start = i + 1;
        }
    }
    if (start < tokens.size()) sentences.emplace_back(start, tokens.size());

    std::vector<Segment> out;
    Segment cur;
    auto flush = [&] {
        if (!cur.tokens.empty()) {
            out.push_back(std::move(cur));
            cur = Segment{};
        }
    };
    for (auto [b, e] : sentences) {
        size_t len = e - b;
        if (len > static_cast<size_t>(max_len)) {
            flush();
            for (size_t p = b; p < e; p += max_len) {
                Segment forced;
                forced.forced = true;
                size_t q = std::min(e, p + max_len);
                forced.tokens.assign(tokens.begin() + p, tokens.begin() + q);
                out.push_back(std::move(forced));
            }
            continue;
        }
        if (cur.tokens.size() + len > static_cast<size_t>(max_len)) flush();
        cur.tokens.insert(cur.tokens.end(), tokens.begin() + b, tokens.begin() + e);
    }
    flush();
    return out;
}

std::string restore(const std::vector<LabeledToken>& tokens) {
    std::string out;
    for (const LabeledToken& tok : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += render_word(tok.text, tok.cap);
        if (char c = punc_label_char(tok.punc)) out.push_back(c);
    }
    return out;
}

SplitIndices split_corpus(size_t num_documents, const std::array<double, 3>& ratios,
                          uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    for (double r : ratios)
        if (!(r > 0.0)) throw std::invalid_argument("split_corpus: ratios must be positive");
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_corpus: ratios must sum to 1");
    if (num_documents < 3)
        throw DataError("split_corpus: need at least 3 documents, got " +
                        std::to_string(num_documents));

    // Largest-remainder apportionment: exact partition, ties to earlier split.
    std::array<size_t, 3> counts;
    std::array<double, 3> frac;
    size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double exact = ratios[i] * static_cast<double>(num_documents);
        counts[i] = static_cast<size_t>(std::floor(exact + 1e-9));
        frac[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < num_documents) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (frac[i] > frac[best]) best = i;
        ++counts[best];
        frac[best] = -1.0;
        ++assigned;
    }

    std::vector<size_t> order(num_documents);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + counts[0]);
    split.valid.assign(order.begin() + counts[0], order.begin() + counts[0] + counts[1]);
    split.test.assign(order.begin() + counts[0] + counts[1], order.end());
    return split;
}

std::vector<Segment> read_dataset(std::istream& in, const std::string& source_name) {
    std::vector<Segment> segments;
    Segment cur;
    std::string line;
    size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw DataError(source_name + ":" + std::to_string(line_no) + ": " + msg);
    };
    auto flush = [&] {
        if (!cur.tokens.empty()) {
            cur.forced = !cur.ends_at_boundary();
            segments.push_back(std::move(cur));
            cur = Segment{};
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos ||
            line.find('\t', t2 + 1) != std::string::npos)
            fail("expected 3 tab-separated fields");
        LabeledToken tok;
        tok.text = line.substr(0, t1);
        std::string cap_field = line.substr(t1 + 1, t2 - t1 - 1);
        std::string punc_field = line.substr(t2 + 1);
        if (tok.text.empty()) fail("empty token text");
        for (char32_t cp : uni::decode_utf8(tok.text)) {
            if (is_kept_punct(cp)) fail("token text contains kept punctuation");
            if (uni::to_lower(cp) != cp) fail("token text is not lowercase");
        }
        if (cap_field != "0" && cap_field != "1" && cap_field != "2")
            fail("unknown capitalization code '" + cap_field + "'");
        tok.cap = static_cast<CapLabel>(cap_field[0] - '0');
        try {
            tok.punc = punc_label_from_name(punc_field);
        } catch (const DataError&) {
            fail("unknown punctuation label '" + punc_field + "'");
        }
        cur.tokens.push_back(std::move(tok));
    }
    flush();
    return segments;
}

std::vector<Segment> read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path);
    return read_dataset(in, path);
}

void write_dataset(std::ostream& out, const std::vector<Segment>& segments) {
    bool first = true;
    for (const Segment& seg : segments) {
        if (!first) out << "\n";
        first = false;
        for (const LabeledToken& tok : seg.tokens)
            out << tok.text << "\t" << static_cast<int>(tok.cap) << "\t"
                << punc_label_name(tok.punc) << "\n";
    }
}

void write_dataset(const std::string& path, const std::vector<Segment>& segments) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file: " + path);
    write_dataset(out, segments);
    if (!out) throw DataError("failed writing dataset file: " + path);
}

}  // namespace capnpunc

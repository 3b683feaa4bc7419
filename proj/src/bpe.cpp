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

#include "capnpunc/bpe.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "capnpunc/error.hpp"
#include "capnpunc/unicode.hpp"

namespace capnpunc {

SubwordVocab::SubwordVocab(std::vector<std::string> base_symbols,
                           std::vector<std::pair<std::string, std::string>> merges)
    : base_symbols_(std::move(base_symbols)), merges_(std::move(merges)) {
    symbols_.assign(2, "");  // PAD, UNK
    for (const auto& s : base_symbols_) {
        if (s.empty()) throw DataError("vocab: empty base symbol");
        if (!id_of_.emplace(s, static_cast<int>(symbols_.size())).second)
            throw DataError("vocab: duplicate base symbol '" + s + "'");
        symbols_.push_back(s);
    }
    int rank = 0;
    for (const auto& [left, right] : merges_) {
        auto li = id_of_.find(left);
        auto ri = id_of_.find(right);
        if (li == id_of_.end() || ri == id_of_.end())
            throw DataError("vocab: merge references unknown symbol '" + left + "' + '" + right +
                            "'");
        std::string merged = left + right;
        int id = static_cast<int>(symbols_.size());
        if (!id_of_.emplace(merged, id).second)
            throw DataError("vocab: duplicate merged symbol '" + merged + "'");
        symbols_.push_back(merged);
        merge_index_[{li->second, ri->second}] = {rank, id};
        ++rank;
    }
}

const std::string& SubwordVocab::symbol(int id) const {
    if (id < 0 || id >= size())
        throw DataError("vocab: unknown id " + std::to_string(id) + " (size " +
                        std::to_string(size()) + ")");
    return symbols_[id];
}

std::vector<int> SubwordVocab::encode_word(const std::string& word) const {
    if (word.empty()) throw std::invalid_argument("encode_word: empty word");
    std::vector<int> ids;
    for (char32_t cp : uni::decode_utf8(word)) {
        auto it = id_of_.find(uni::encode_utf8(cp));
        ids.push_back(it == id_of_.end() ? kUnkId : it->second);
    }
    // Repeatedly apply the earliest-trained merge present in the sequence.
    while (ids.size() > 1) {
        int best_rank = -1, best_pos = -1, best_id = -1;
        for (size_t i = 0; i + 1 < ids.size(); ++i) {
            auto it = merge_index_.find({ids[i], ids[i + 1]});
            if (it == merge_index_.end()) continue;
            if (best_rank < 0 || it->second.first < best_rank) {
                best_rank = it->second.first;
                best_pos = static_cast<int>(i);
                best_id = it->second.second;
            }
        }
        if (best_rank < 0) break;
        ids[best_pos] = best_id;
        ids.erase(ids.begin() + best_pos + 1);
    }
    return ids;
}

std::string SubwordVocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) out += symbol(id);
    return out;
}

std::string SubwordVocab::serialize() const {
    std::ostringstream os;
    os << "bpe v1\n";
    os << "base " << base_symbols_.size() << "\n";
    for (const auto& s : base_symbols_) os << s << "\n";
    os << "merges " << merges_.size() << "\n";
    for (const auto& [l, r] : merges_) os << l << " " << r << "\n";
    return os.str();
}

SubwordVocab SubwordVocab::deserialize(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(is, line)) throw DataError(std::string("vocab: truncated at ") + what);
        return line;
    };
    if (next_line("header") != "bpe v1") throw DataError("vocab: bad header '" + line + "'");
    std::istringstream hdr(next_line("base count"));
    std::string tag;
    size_t n = 0;
    if (!(hdr >> tag >> n) || tag != "base") throw DataError("vocab: bad base count line");
    std::vector<std::string> base;
    base.reserve(n);
    for (size_t i = 0; i < n; ++i) base.push_back(next_line("base symbol"));
    std::istringstream mhdr(next_line("merge count"));
    size_t m = 0;
    if (!(mhdr >> tag >> m) || tag != "merges") throw DataError("vocab: bad merge count line");
    std::vector<std::pair<std::string, std::string>> merges;
    merges.reserve(m);
    for (size_t i = 0; i < m; ++i) {
        std::string& ln = next_line("merge rule");
        size_t sp = ln.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 >= ln.size())
            throw DataError("vocab: bad merge rule '" + ln + "'");
        merges.emplace_back(ln.substr(0, sp), ln.substr(sp + 1));
    }
    return SubwordVocab(std::move(base), std::move(merges));
}

SubwordVocab train_vocab(const std::vector<std::string>& corpus_words, int target_size) {
    if (corpus_words.empty()) throw DataError("train_vocab: empty corpus");

    std::unordered_map<std::string, long> word_count;
    for (const std::string& w : corpus_words) {
        if (w.empty()) throw std::invalid_argument("train_vocab: empty word in corpus");
        for (char32_t cp : uni::decode_utf8(w))
            if (cp <= 0x20)
                throw std::invalid_argument("train_vocab: word contains whitespace/control: '" +
                                            w + "'");
        ++word_count[w];
    }

    // Base alphabet in byte-lexicographic order so ids are reproducible.
    std::set<std::string> base_set;
    for (const auto& [w, c] : word_count)
        for (char32_t cp : uni::decode_utf8(w)) base_set.insert(uni::encode_utf8(cp));
    std::vector<std::string> base(base_set.begin(), base_set.end());

    int min_size = static_cast<int>(base.size()) + 2;
    if (target_size < min_size)
        throw ConfigError("train_vocab: target size " + std::to_string(target_size) +
                          " below minimum " + std::to_string(min_size) + " (" +
                          std::to_string(base.size()) + " base symbols + PAD + UNK)");

    // Working symbol table; words as id sequences.
    std::vector<std::string> symtext(2, "");
    std::unordered_map<std::string, int> symid;
    for (const auto& s : base) {
        symid.emplace(s, static_cast<int>(symtext.size()));
        symtext.push_back(s);
    }
    struct WordEntry {
        std::vector<int> syms;
        long count;
    };
    std::vector<WordEntry> words;
    words.reserve(word_count.size());
    for (const auto& [w, c] : word_count) {
        WordEntry e;
        e.count = c;
        for (char32_t cp : uni::decode_utf8(w)) e.syms.push_back(symid.at(uni::encode_utf8(cp)));
        words.push_back(std::move(e));
    }

    std::vector<std::pair<std::string, std::string>> merges;
    while (static_cast<int>(symtext.size()) < target_size) {
        std::map<std::pair<int, int>, long> pair_count;
        for (const auto& e : words)
            for (size_t i = 0; i + 1 < e.syms.size(); ++i)
                pair_count[{e.syms[i], e.syms[i + 1]}] += e.count;

        // Highest count wins; ties break on smallest merged string, then pair.
        bool found = false;
        long best_count = 0;
        std::pair<int, int> best_pair{0, 0};
        std::string best_merged;
        for (const auto& [pr, cnt] : pair_count) {
            if (cnt < 2) continue;
            std::string merged = symtext[pr.first] + symtext[pr.second];
            bool better = false;
            if (!found || cnt > best_count) {
                better = true;
            } else if (cnt == best_count) {
                if (merged < best_merged) {
                    better = true;
                } else if (merged == best_merged) {
                    better = std::make_pair(symtext[pr.first], symtext[pr.second]) <
                             std::make_pair(symtext[best_pair.first], symtext[best_pair.second]);
                }
            }
            if (better) {
                found = true;
                best_count = cnt;
                best_pair = pr;
                best_merged = merged;
            }
        }
        if (!found) break;

        int new_id = static_cast<int>(symtext.size());
        merges.emplace_back(symtext[best_pair.first], symtext[best_pair.second]);
        symtext.push_back(best_merged);
        for (auto& e : words) {
            size_t w = 0;
            for (size_t r = 0; r < e.syms.size();) {
                if (r + 1 < e.syms.size() && e.syms[r] == best_pair.first &&
                    e.syms[r + 1] == best_pair.second) {
                    e.syms[w++] = new_id;
                    r += 2;
                } else {
                    e.syms[w++] = e.syms[r++];
                }
            }
            e.syms.resize(w);
        }
    }

    return SubwordVocab(std::move(base), std::move(merges));
}

}  // namespace capnpunc

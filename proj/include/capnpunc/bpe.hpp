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
#include <string>
#include <unordered_map>
#include <vector>

namespace capnpunc {

// Byte-pair vocabulary over code-point base symbols, merged per word (no
// cross-word merges). Immutable after training; safe to share read-only.
class SubwordVocab {
   public:
    static constexpr int kPadId = 0;
    static constexpr int kUnkId = 1;

    SubwordVocab() = default;

    // Reconstructs a vocabulary from its base symbols (in id order) and
    // ordered merge list. Used by training and deserialization.
    SubwordVocab(std::vector<std::string> base_symbols,
                 std::vector<std::pair<std::string, std::string>> merges);

    int size() const { return static_cast<int>(symbols_.size()); }
    const std::vector<std::string>& base_symbols() const { return base_symbols_; }
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

    // Symbol string for an id; PAD and UNK map to the empty string.
    const std::string& symbol(int id) const;

    std::vector<int> encode_word(const std::string& word) const;
    std::string decode(const std::vector<int>& ids) const;

    // Canonical text form; byte-identical for identical training inputs.
    std::string serialize() const;
    static SubwordVocab deserialize(const std::string& text);

   private:
    std::vector<std::string> base_symbols_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::vector<std::string> symbols_;               // id -> text ("" for PAD/UNK)
    std::unordered_map<std::string, int> id_of_;     // text -> id
    // (left id, right id) -> (rank, merged id)
    std::map<std::pair<int, int>, std::pair<int, int>> merge_index_;
};

// Learns merges by greedy pair frequency. Ties break on the lexicographically
// smallest merged string, then smallest (left, right) pair. Merging stops at
// target_size or when no pair occurs at least twice.
SubwordVocab train_vocab(const std::vector<std::string>& corpus_words, int target_size);

}  // namespace capnpunc

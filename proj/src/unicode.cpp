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

#include "capnpunc/unicode.hpp"

#include <algorithm>

namespace capnpunc::uni {

namespace {

struct CasePair {
    char32_t upper;
    char32_t lower;
};

struct CpRange {
    char32_t lo;
    char32_t hi;
};

#include "unicode_tables.inc"

constexpr size_t kNumCasePairs = sizeof(kCasePairs) / sizeof(kCasePairs[0]);
constexpr size_t kNumPunctRanges = sizeof(kPunctRanges) / sizeof(kPunctRanges[0]);
constexpr size_t kNumSpaceCps = sizeof(kSpaceCps) / sizeof(kSpaceCps[0]);

// kCasePairs is sorted by the upper code point.
const CasePair* find_by_upper(char32_t cp) {
    auto it = std::lower_bound(kCasePairs, kCasePairs + kNumCasePairs, cp,
                               [](const CasePair& p, char32_t c) { return p.upper < c; });
    if (it != kCasePairs + kNumCasePairs && it->upper == cp) return it;
    return nullptr;
}

// Lowercase side is not sorted; build a sorted view once.
const std::vector<CasePair>& by_lower() {
    static const std::vector<CasePair> sorted = [] {
        std::vector<CasePair> v(kCasePairs, kCasePairs + kNumCasePairs);
        std::sort(v.begin(), v.end(),
                  [](const CasePair& a, const CasePair& b) { return a.lower < b.lower; });
        return v;
    }();
    return sorted;
}

const CasePair* find_by_lower(char32_t cp) {
    const auto& v = by_lower();
    auto it = std::lower_bound(v.begin(), v.end(), cp,
                               [](const CasePair& p, char32_t c) { return p.lower < c; });
    if (it != v.end() && it->lower == cp) return &*it;
    return nullptr;
}

}  // namespace

std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        unsigned char b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            out.push_back(b0);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(b0);
            ++i;
            continue;
        }
        bool ok = true;
        for (size_t k = 1; k < len; ++k) {
            unsigned char bk = static_cast<unsigned char>(s[i + k]);
            if ((bk & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        if (!ok) {
            out.push_back(b0);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
    std::string out;
    for (char32_t cp : cps) out += encode_utf8(cp);
    return out;
}

char32_t to_lower(char32_t cp) {
    const CasePair* p = find_by_upper(cp);
    return p ? p->lower : cp;
}

char32_t to_upper(char32_t cp) {
    const CasePair* p = find_by_lower(cp);
    return p ? p->upper : cp;
}

bool is_upper(char32_t cp) { return find_by_upper(cp) != nullptr; }

bool is_lower(char32_t cp) { return find_by_lower(cp) != nullptr; }

bool is_cased(char32_t cp) { return is_upper(cp) || is_lower(cp); }

bool is_punct(char32_t cp) {
    auto it = std::upper_bound(kPunctRanges, kPunctRanges + kNumPunctRanges, cp,
                               [](char32_t c, const CpRange& r) { return c < r.lo; });
    if (it == kPunctRanges) return false;
    --it;
    return cp >= it->lo && cp <= it->hi;
}

bool is_space(char32_t cp) {
    for (size_t i = 0; i < kNumSpaceCps; ++i)
        if (kSpaceCps[i] == cp) return true;
    return false;
}

std::string lowercase(std::string_view s) {
    std::vector<char32_t> cps = decode_utf8(s);
    for (char32_t& cp : cps) cp = to_lower(cp);
    return encode_utf8(cps);
}

}  // namespace capnpunc::uni

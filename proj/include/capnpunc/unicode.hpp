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

#include <string>
#include <string_view>
#include <vector>

namespace capnpunc::uni {

// Decodes UTF-8 permissively: an invalid byte is taken as its Latin-1 code
// point and the scan advances one byte.
std::vector<char32_t> decode_utf8(std::string_view s);

std::string encode_utf8(char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& cps);

// Simple 1:1 case mapping over the BMP (frozen table). Identity for
// caseless code points.
char32_t to_lower(char32_t cp);
char32_t to_upper(char32_t cp);

// True when cp is an uppercase (resp. lowercase) letter in the table.
bool is_upper(char32_t cp);
bool is_lower(char32_t cp);

// A cased letter: has an entry on either side of the case table. This is
// the notion of "alphabetic" used by the capitalization labels; caseless
// scripts carry no casing information.
bool is_cased(char32_t cp);

// Unicode punctuation (category P*) or format control (Cf). These are the
// characters cleaning removes.
bool is_punct(char32_t cp);

bool is_space(char32_t cp);

std::string lowercase(std::string_view s);

}  // namespace capnpunc::uni

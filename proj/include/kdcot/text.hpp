// Copyright 2026 The kdcot Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kdcot::text {

std::string_view trim(std::string_view s);

/// Splits on every occurrence of `sep`; empty pieces are kept.
std::vector<std::string> split(std::string_view s, std::string_view sep);

/// Splits on runs of ASCII whitespace; no empty pieces.
std::vector<std::string> split_ws(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with(std::string_view s, std::string_view prefix);

std::string ascii_lower(std::string_view s);

/// Decodes one UTF-8 code point starting at `pos` and advances `pos`.
/// Malformed bytes decode to themselves (0x80..0xFF) so decoding is total.
char32_t next_codepoint(std::string_view s, std::size_t& pos);

void append_utf8(std::string& out, char32_t cp);

/// Maps Latin-1 / Latin Extended-A letters to their unaccented ASCII base
/// (possibly two letters, e.g. "ae"). Returns empty when there is no mapping.
std::string_view fold_accent(char32_t cp);

/// True for an ASCII upper-case letter or an accented Latin capital.
bool is_upper_codepoint(char32_t cp);

/// Replaces tabs, CR and LF with single spaces.
std::string flatten_line(std::string_view s);

}  // namespace kdcot::text

/**
 * Copyright 2026 The rolefed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rolefed::html {

inline constexpr std::uint32_t kCharPad = 256;

/// Lengths and bucket counts of the three index streams. The PAD value of the
/// word and DOM streams equals their bucket count.
struct PreprocConfig {
  std::size_t char_len = 4096;
  std::size_t word_len = 1024;
  std::size_t dom_len = 1024;
  std::uint32_t word_buckets = 131071;
  std::uint32_t dom_buckets = 8190;
  std::uint64_t shuffle_seed = 42;

  std::uint32_t word_pad() const { return word_buckets; }
  std::uint32_t dom_pad() const { return dom_buckets; }
  /// Throws ConfigError on non-positive lengths or bucket counts below 2.
  void validate() const;
};

/// Fixed-length character, visible-word and DOM-tag index sequences of a page.
struct HtmlStreams {
  std::vector<std::uint32_t> char_ids;
  std::vector<std::uint32_t> word_ids;
  std::vector<std::uint32_t> dom_ids;

  bool operator==(const HtmlStreams&) const = default;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64(std::string_view bytes);

/// Line breaks and tabs become spaces, space runs collapse to one, zero-width
/// and control characters are dropped. Markup is left untouched. Bytes that
/// are not valid UTF-8 become U+FFFD.
std::string normalize_html(std::string_view raw);

std::vector<std::uint32_t> char_stream(std::string_view html, const PreprocConfig& cfg);

/// Text outside tags, comments and script/style/template bodies, with
/// character references decoded. Tag boundaries separate words.
std::string extract_visible_text(std::string_view html);

/// Lowercased maximal runs of letters, combining marks, decimal digits,
/// underscore, ZWJ and ZWNJ.
std::vector<std::string> tokenize_words(std::string_view text);

std::vector<std::uint32_t> word_stream(std::span<const std::string> tokens, const PreprocConfig& cfg);

/// Lowercased opening and self-closing tag names in scan order, hashed into
/// DOM buckets. Closing tags, comments and declarations are not included.
std::vector<std::uint32_t> dom_stream(std::string_view html, const PreprocConfig& cfg);

/// Normalizes `raw` and produces all three streams.
HtmlStreams preprocess(std::string_view raw, const PreprocConfig& cfg);

/// Length, range and PAD-suffix invariants.
bool streams_valid(const HtmlStreams& s, const PreprocConfig& cfg);

/// Binary record: label (u8), char ids (u16), word ids (u32), dom ids (u16),
/// all little-endian, lengths from `cfg`.
std::size_t record_size(const PreprocConfig& cfg);
void write_record(std::ostream& out, int label, const HtmlStreams& streams, const PreprocConfig& cfg);
/// Returns false at clean end of stream; throws InputError on a truncated record.
bool read_record(std::istream& in, int& label, HtmlStreams& streams, const PreprocConfig& cfg);

}  // namespace rolefed::html

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

#include "html/preproc.hpp"

#include <istream>
#include <ostream>

#include "html/utf8.hpp"
#include "util/errors.hpp"

namespace rolefed::html {
namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

bool ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }
bool ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }
bool tag_name_char(char c) {
  return ascii_alpha(c) || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == ':' || c == '.';
}

bool is_raw_text(std::string_view name) { return name == "script" || name == "style" || name == "template"; }

// Position just past the first "</name" (case-insensitive) whose name ends at
// a delimiter, or npos.
std::size_t find_raw_text_end(std::string_view s, std::size_t from, std::string_view name) {
  for (std::size_t j = s.find('<', from); j != std::string_view::npos; j = s.find('<', j + 1)) {
    if (j + 1 >= s.size() || s[j + 1] != '/') continue;
    const std::size_t start = j + 2;
    if (start + name.size() > s.size()) return std::string_view::npos;
    bool match = true;
    for (std::size_t k = 0; k < name.size() && match; ++k) match = ascii_lower(s[start + k]) == name[k];
    if (!match) continue;
    const std::size_t after = start + name.size();
    if (after == s.size() || ascii_space(s[after]) || s[after] == '/' || s[after] == '>') return j;
  }
  return std::string_view::npos;
}

// End of a start tag beginning at `pos` ('<' + letter): index of the closing
// '>' honoring quoted attribute values, or npos if unterminated.
std::size_t find_tag_end(std::string_view s, std::size_t pos) {
  std::size_t i = pos + 1;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '>') return i;
    if (c == '=') {
      ++i;
      while (i < s.size() && ascii_space(s[i])) ++i;
      if (i < s.size() && (s[i] == '"' || s[i] == '\'')) {
        const std::size_t close = s.find(s[i], i + 1);
        if (close == std::string_view::npos) return std::string_view::npos;
        i = close + 1;
      }
      continue;
    }
    ++i;
  }
  return std::string_view::npos;
}

/// Tolerant single-pass scanner. Calls on_text(string_view) for text runs
/// and on_tag(std::string lowercase_name) for each start tag.
template <typename OnText, typename OnTag>
void scan_html(std::string_view s, OnText&& on_text, OnTag&& on_tag) {
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    if (s[i] != '<') {
      const std::size_t next = s.find('<', i);
      const std::size_t end = next == std::string_view::npos ? n : next;
      on_text(s.substr(i, end - i));
      i = end;
      continue;
    }
    if (s.substr(i, 4) == "<!--") {
      const std::size_t close = s.find("-->", i + 4);
      i = close == std::string_view::npos ? n : close + 3;
      continue;
    }
    if (i + 1 < n && (s[i + 1] == '!' || s[i + 1] == '?')) {
      const std::size_t close = s.find('>', i + 2);
      i = close == std::string_view::npos ? n : close + 1;
      continue;
    }
    if (i + 2 < n && s[i + 1] == '/' && ascii_alpha(s[i + 2])) {
      const std::size_t close = s.find('>', i + 2);
      i = close == std::string_view::npos ? n : close + 1;
      on_text(" ");  // a closing tag still separates words
      continue;
    }
    if (i + 1 < n && ascii_alpha(s[i + 1])) {
      const std::size_t close = find_tag_end(s, i);
      if (close == std::string_view::npos) return;  // unterminated tag swallows the rest
      std::string name;
      for (std::size_t k = i + 1; k < close && tag_name_char(s[k]); ++k) name += ascii_lower(s[k]);
      const bool self_closing = close > i + 1 && s[close - 1] == '/';
      on_tag(name);
      i = close + 1;
      if (is_raw_text(name) && !self_closing) {
        const std::size_t end = find_raw_text_end(s, i, name);
        i = end == std::string_view::npos ? n : end;
      }
      continue;
    }
    on_text(s.substr(i, 1));
    ++i;
  }
}

char32_t named_entity(std::string_view name) {
  if (name == "amp") return U'&';
  if (name == "lt") return U'<';
  if (name == "gt") return U'>';
  if (name == "quot") return U'"';
  if (name == "apos") return U'\'';
  if (name == "nbsp") return 0xA0;
  return 0;
}

// Appends text with character references decoded.
void append_decoded(std::string& out, std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '&') {
      out += text[i++];
      continue;
    }
    const std::size_t semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += text[i++];
      continue;
    }
    std::string_view body = text.substr(i + 1, semi - i - 1);
    char32_t cp = 0;
    if (!body.empty() && body[0] == '#') {
      const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
      std::string_view digits = body.substr(hex ? 2 : 1);
      bool ok = !digits.empty();
      std::uint32_t v = 0;
      for (char c : digits) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else { ok = false; break; }
        v = v * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
        if (v > 0x10FFFF) { ok = false; break; }
      }
      if (ok && v != 0 && !(v >= 0xD800 && v <= 0xDFFF)) cp = v;
    } else {
      cp = named_entity(body);
    }
    if (cp == 0) {
      out += text[i++];
      continue;
    }
    append_utf8(out, cp);
    i = semi + 1;
  }
}

constexpr char32_t kReplacementChar = 0xFFFD;

bool removed_control(char32_t cp) {
  return (cp < 0x20 && cp != U'\t' && cp != U'\n' && cp != U'\r') || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F);
}

bool zero_width(char32_t cp) { return cp == 0x200B || cp == 0x200C || cp == 0x200D || cp == 0xFEFF; }

bool joiner(char32_t cp) { return cp == 0x200C || cp == 0x200D; }

bool token_context_char(char32_t cp) { return cp != kInvalidCodePoint && !joiner(cp) && is_word_char(cp); }

template <typename T>
std::vector<std::uint32_t> pad_to(std::vector<T> ids, std::size_t len, std::uint32_t pad) {
  std::vector<std::uint32_t> out(len, pad);
  for (std::size_t i = 0; i < len && i < ids.size(); ++i) out[i] = static_cast<std::uint32_t>(ids[i]);
  return out;
}

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int b = 0; b < bytes; ++b) buf[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
  out.write(buf, bytes);
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int b = bytes - 1; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

}  // namespace

void PreprocConfig::validate() const {
  if (char_len == 0 || word_len == 0 || dom_len == 0) throw ConfigError("stream lengths must be positive");
  if (word_buckets < 2 || dom_buckets < 2) throw ConfigError("bucket counts must be at least 2");
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = kFnvOffset;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string normalize_html(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  char32_t last = 0;  // last emitted code point, 0 at start
  std::size_t i = 0;
  while (i < raw.size()) {
    const Decoded d = decode_utf8(raw, i);
    const char32_t cp = d.cp;
    if (cp == kInvalidCodePoint) {
      // Passing the byte through could splice a valid sequence once a
      // neighbor is dropped, which would break idempotence.
      append_utf8(out, kReplacementChar);
      last = kReplacementChar;
      i += d.len;
      continue;
    }
    if (cp == U'\n' || cp == U'\r' || cp == U'\t' || cp == U' ') {
      if (last != U' ') out += ' ';
      last = U' ';
      i += d.len;
      continue;
    }
    if (removed_control(cp)) {
      i += d.len;
      continue;
    }
    if (zero_width(cp)) {
      bool keep = false;
      if (joiner(cp) && token_context_char(last) && i + d.len < raw.size()) {
        keep = token_context_char(decode_utf8(raw, i + d.len).cp);
      }
      if (keep) {
        out.append(raw.substr(i, d.len));
        last = cp;
      }
      i += d.len;
      continue;
    }
    out.append(raw.substr(i, d.len));
    last = cp;
    i += d.len;
  }
  return out;
}

std::vector<std::uint32_t> char_stream(std::string_view html, const PreprocConfig& cfg) {
  std::vector<std::uint32_t> out(cfg.char_len, kCharPad);
  for (std::size_t i = 0; i < cfg.char_len && i < html.size(); ++i) out[i] = static_cast<unsigned char>(html[i]);
  return out;
}

std::string extract_visible_text(std::string_view html) {
  std::string raw;
  scan_html(
      html,
      [&](std::string_view text) { append_decoded(raw, text); },
      [&](const std::string&) { raw += ' '; });
  // Collapse whitespace and trim.
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const Decoded d = decode_utf8(text, i);
    i += d.len;
    if (d.cp != kInvalidCodePoint && is_word_char(d.cp)) {
      append_utf8(current, to_lower(d.cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::uint32_t> word_stream(std::span<const std::string> tokens, const PreprocConfig& cfg) {
  std::vector<std::uint32_t> out(cfg.word_len, cfg.word_pad());
  for (std::size_t i = 0; i < cfg.word_len && i < tokens.size(); ++i) {
    out[i] = static_cast<std::uint32_t>(fnv1a64(tokens[i]) % cfg.word_buckets);
  }
  return out;
}

std::vector<std::uint32_t> dom_stream(std::string_view html, const PreprocConfig& cfg) {
  std::vector<std::uint32_t> ids;
  ids.reserve(cfg.dom_len);
  scan_html(
      html, [](std::string_view) {},
      [&](const std::string& name) {
        if (ids.size() < cfg.dom_len) ids.push_back(static_cast<std::uint32_t>(fnv1a64(name) % cfg.dom_buckets));
      });
  return pad_to(std::move(ids), cfg.dom_len, cfg.dom_pad());
}

HtmlStreams preprocess(std::string_view raw, const PreprocConfig& cfg) {
  const std::string norm = normalize_html(raw);
  HtmlStreams s;
  s.char_ids = char_stream(norm, cfg);
  const std::vector<std::string> tokens = tokenize_words(extract_visible_text(norm));
  s.word_ids = word_stream(tokens, cfg);
  s.dom_ids = dom_stream(norm, cfg);
  return s;
}

bool streams_valid(const HtmlStreams& s, const PreprocConfig& cfg) {
  auto check = [](const std::vector<std::uint32_t>& ids, std::size_t len, std::uint32_t pad) {
    if (ids.size() != len) return false;
    bool in_pad = false;
    for (std::uint32_t v : ids) {
      if (v == pad) {
        in_pad = true;
      } else if (in_pad || v > pad) {
        return false;
      }
    }
    return true;
  };
  return check(s.char_ids, cfg.char_len, kCharPad) && check(s.word_ids, cfg.word_len, cfg.word_pad()) &&
         check(s.dom_ids, cfg.dom_len, cfg.dom_pad());
}

std::size_t record_size(const PreprocConfig& cfg) {
  return 1 + 2 * cfg.char_len + 4 * cfg.word_len + 2 * cfg.dom_len;
}

void write_record(std::ostream& out, int label, const HtmlStreams& streams, const PreprocConfig& cfg) {
  if (label != 0 && label != 1) throw InputError("record label must be 0 or 1");
  if (cfg.dom_buckets > 0xFFFF) throw ConfigError("DOM bucket count does not fit the u16 record field");
  if (!streams_valid(streams, cfg)) throw InputError("streams violate the configured lengths or ranges");
  put_le(out, static_cast<std::uint64_t>(label), 1);
  for (std::uint32_t v : streams.char_ids) put_le(out, v, 2);
  for (std::uint32_t v : streams.word_ids) put_le(out, v, 4);
  for (std::uint32_t v : streams.dom_ids) put_le(out, v, 2);
}

bool read_record(std::istream& in, int& label, HtmlStreams& streams, const PreprocConfig& cfg) {
  std::vector<unsigned char> buf(record_size(cfg));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got == 0) return false;
  if (got != buf.size()) throw InputError("truncated stream record");
  label = buf[0];
  if (label != 0 && label != 1) throw InputError("stream record label must be 0 or 1");
  const unsigned char* p = buf.data() + 1;
  streams.char_ids.resize(cfg.char_len);
  streams.word_ids.resize(cfg.word_len);
  streams.dom_ids.resize(cfg.dom_len);
  for (auto& v : streams.char_ids) v = static_cast<std::uint32_t>(get_le(p, 2)), p += 2;
  for (auto& v : streams.word_ids) v = static_cast<std::uint32_t>(get_le(p, 4)), p += 4;
  for (auto& v : streams.dom_ids) v = static_cast<std::uint32_t>(get_le(p, 2)), p += 2;
  if (!streams_valid(streams, cfg)) throw InputError("stream record violates range or PAD invariants");
  return true;
}

}  // namespace rolefed::html

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

#include <chrono>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "html/preproc.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

using namespace rolefed;
using namespace rolefed::html;

namespace {

// Reference FNV-1a written from the published definition, kept apart from the
// library version on purpose.
std::uint64_t fnv_reference(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool pad_suffix_ok(const std::vector<std::uint32_t>& ids, std::size_t len, std::uint32_t pad) {
  if (ids.size() != len) return false;
  bool in_pad = false;
  for (std::uint32_t id : ids) {
    if (id > pad) return false;
    if (id == pad) in_pad = true;
    else if (in_pad) return false;
  }
  return true;
}

bool invariants_hold(const HtmlStreams& s, const PreprocConfig& cfg) {
  return pad_suffix_ok(s.char_ids, cfg.char_len, kCharPad) && pad_suffix_ok(s.word_ids, cfg.word_len, cfg.word_pad()) &&
         pad_suffix_ok(s.dom_ids, cfg.dom_len, cfg.dom_pad());
}

std::size_t count_non_pad(const std::vector<std::uint32_t>& ids, std::uint32_t pad) {
  std::size_t n = 0;
  while (n < ids.size() && ids[n] != pad) ++n;
  return n;
}

class HtmlFuzzer {
 public:
  explicit HtmlFuzzer(std::uint64_t seed) : rng_(seed) {}

  std::string page() {
    std::string out;
    const std::size_t parts = rng_.below(40);
    for (std::size_t i = 0; i < parts; ++i) out += fragment();
    return out;
  }

 private:
  std::string pick(std::initializer_list<const char*> items) {
    auto it = items.begin();
    std::advance(it, rng_.below(items.size()));
    return *it;
  }

  std::string text() {
    std::string out;
    const std::size_t n = rng_.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      out += pick({"login", "Verify", " ", "\n", "\t", "caf\xC3\xA9", "\xE2\x80\x8B", "\xE2\x80\x8D", "\xEF\xBB\xBF",
                   "&amp;", "&#x41;", "&#99999999;", "&bogus", "\xD0\x9F\xD0\xB0", "\xF0\x9F\x98\x80", "a_b", "2024",
                   "\x01", "\x7F", "\xC2\x85", "\xFF", "\xC3", "<", ">", "=", "'", "\"", "e\xCC\x81"});
    }
    return out;
  }

  std::string attrs() {
    std::string out;
    const std::size_t n = rng_.below(4);
    for (std::size_t i = 0; i < n; ++i) {
      out += " " + pick({"href", "class", "x", "data-y", "onclick"});
      switch (rng_.below(4)) {
        case 0: out += "='" + text() + "'"; break;
        case 1: out += "=\"" + text() + "\""; break;
        case 2: out += "=" + pick({"v", "a>b", "1"}); break;
        default: break;
      }
    }
    return out;
  }

  std::string fragment() {
    const std::string tag =
        pick({"div", "A", "form", "input", "iframe", "script", "style", "template", "p", "SPAN", "img", "x-y", "h1"});
    switch (rng_.below(10)) {
      case 0: return text();
      case 1: return "<" + tag + attrs() + ">";
      case 2: return "</" + tag + ">";
      case 3: return "<" + tag + attrs() + "/>";
      case 4: return "<!--" + text() + (rng_.below(4) ? "-->" : "");
      case 5: return "<!DOCTYPE html>";
      case 6: return "<" + tag + ">" + text() + (rng_.below(3) ? "</" + tag + ">" : "");
      case 7: {
        std::string raw(rng_.below(24), '\0');
        for (char& c : raw) c = static_cast<char>(rng_.below(256));
        return raw;
      }
      case 8: return "<" + tag + attrs();
      default: return "<?xml " + text() + "?>";
    }
  }

  Rng rng_;
};

}  // namespace

TEST_CASE("fnv1a64 test vectors from the reference implementation") {
  CHECK(fnv_reference("") == 0xcbf29ce484222325ULL);
  CHECK(fnv_reference("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::string s(rng.below(64), '\0');
    for (char& c : s) c = static_cast<char>(rng.below(256));
    CHECK(fnv1a64(s) == fnv_reference(s));
    CHECK(fnv1a64(s) == fnv1a64(s));
  }
}

TEST_CASE("normalize_html") {
  CHECK(normalize_html("a\n\tb") == "a b");
  CHECK(normalize_html("a    b") == "a b");
  CHECK(normalize_html("a\r\n b") == "a b");
  CHECK(normalize_html("x\xE2\x80\x8By") == "xy");
  CHECK(normalize_html("\xEF\xBB\xBFhi") == "hi");
  CHECK(normalize_html("a\x01\x7F" "b\xC2\x85") == "ab");
  CHECK(normalize_html("<div class='a  b'>") == "<div class='a b'>");
  // Joiners survive only between word characters.
  CHECK(normalize_html("a\xE2\x80\x8D" "b") == "a\xE2\x80\x8D" "b");
  CHECK(normalize_html("a \xE2\x80\x8D b") == "a b");
  CHECK(normalize_html("\xE2\x80\x8C" "a") == "a");
  CHECK(normalize_html("a\xE2\x80\x8C") == "a");
  CHECK(normalize_html("ok \xFF done") == "ok \xEF\xBF\xBD done");
  CHECK(normalize_html("\xC2\x01\x85") == "\xEF\xBF\xBD\xEF\xBF\xBD");
  for (const char* s : {"a b", "<p>x</p>", ""}) CHECK(normalize_html(s) == s);
}

TEST_CASE("char_stream") {
  const PreprocConfig cfg;
  auto ids = char_stream("AB", cfg);
  REQUIRE(ids.size() == 4096);
  CHECK(ids[0] == 65);
  CHECK(ids[1] == 66);
  CHECK(count_non_pad(ids, kCharPad) == 2);

  ids = char_stream(std::string(5000, 'x'), cfg);
  CHECK(count_non_pad(ids, kCharPad) == 4096);

  ids = char_stream("\xC3\xA9", cfg);
  CHECK(ids[0] == 195);
  CHECK(ids[1] == 169);
  CHECK(ids[2] == kCharPad);
}

TEST_CASE("extract_visible_text") {
  CHECK(extract_visible_text("<p>hi</p>") == "hi");
  CHECK(extract_visible_text("<script>var x=1</script>ok") == "ok");
  CHECK(extract_visible_text("<div a='<b>'>t</div>") == "t");
  CHECK(extract_visible_text("<style>p{}</style><!-- c --><template>z</template>v") == "v");
  CHECK(extract_visible_text("<SCRIPT>x</SCRIPT>y") == "y");
  CHECK(extract_visible_text("a &amp; b &lt;c&gt; &#65;&#x42;") == "a & b <c> AB");
  CHECK(extract_visible_text("<b>a</b>c") == "a c");
  CHECK(extract_visible_text("1 < 2") == "1 < 2");
  CHECK(extract_visible_text("<div unclosed") == "");
  CHECK(extract_visible_text("<script>never closed") == "");
}

TEST_CASE("tokenize_words") {
  CHECK(tokenize_words("Log-in now!") == std::vector<std::string>{"log", "in", "now"});
  CHECK(tokenize_words("user_name2") == std::vector<std::string>{"user_name2"});
  CHECK(tokenize_words("").empty());
  CHECK(tokenize_words("CAF\xC3\x89 ok") == std::vector<std::string>{"caf\xC3\xA9", "ok"});
  CHECK(tokenize_words("e\xCC\x81t\xC3\xA9") == std::vector<std::string>{"e\xCC\x81t\xC3\xA9"});
  CHECK(tokenize_words("a\xE2\x80\x8D" "b c") == std::vector<std::string>{"a\xE2\x80\x8D" "b", "c"});
  CHECK(tokenize_words("\xD0\x9F\xD1\x80\xD0\xB8\xD0\xB2\xD0\xB5\xD1\x82") ==
        std::vector<std::string>{"\xD0\xBF\xD1\x80\xD0\xB8\xD0\xB2\xD0\xB5\xD1\x82"});
  CHECK(tokenize_words("\xF0\x9F\x98\x80 x") == std::vector<std::string>{"x"});
}

TEST_CASE("word_stream") {
  const PreprocConfig cfg;
  auto ids = word_stream({}, cfg);
  CHECK(ids == std::vector<std::uint32_t>(1024, 131071));

  std::vector<std::string> many(2000, "tok");
  ids = word_stream(many, cfg);
  CHECK(count_non_pad(ids, cfg.word_pad()) == 1024);

  const std::vector<std::string> login{"login"};
  ids = word_stream(login, cfg);
  CHECK(ids[0] == fnv_reference("login") % 131071);
  CHECK(ids[1] == 131071);
}

TEST_CASE("dom_stream") {
  const PreprocConfig cfg;
  auto ids = dom_stream("<html><body><a>", cfg);
  CHECK(count_non_pad(ids, cfg.dom_pad()) == 3);
  CHECK(ids[0] == fnv_reference("html") % 8190);
  CHECK(ids[2] == fnv_reference("a") % 8190);
  CHECK(ids.size() == 1024);

  CHECK(dom_stream("</div>", cfg) == std::vector<std::uint32_t>(1024, 8190));
  CHECK(dom_stream("<IMG/>", cfg)[0] == dom_stream("<img>", cfg)[0]);
  CHECK(count_non_pad(dom_stream("<!-- <a> --><!DOCTYPE html><p x='<b>'>", cfg), 8190) == 1);
  CHECK(count_non_pad(dom_stream("<script><a></script><i>", cfg), 8190) == 2);
}

TEST_CASE("preprocess") {
  const PreprocConfig cfg;
  HtmlStreams empty = preprocess("", cfg);
  CHECK(empty.char_ids == std::vector<std::uint32_t>(4096, kCharPad));
  CHECK(empty.word_ids == std::vector<std::uint32_t>(1024, cfg.word_pad()));
  CHECK(empty.dom_ids == std::vector<std::uint32_t>(1024, cfg.dom_pad()));

  std::string page = "<html><body>";
  for (int i = 0; i < 400; ++i) page += "<p>secure login verify account</p>\n";
  const HtmlStreams a = preprocess(page, cfg);
  CHECK(a == preprocess(page, cfg));
  CHECK(count_non_pad(a.char_ids, kCharPad) == 4096);
  CHECK(invariants_hold(a, cfg));
}

TEST_CASE("binary records round-trip") {
  PreprocConfig cfg;
  cfg.char_len = 16;
  cfg.word_len = 4;
  cfg.dom_len = 3;
  CHECK(record_size(cfg) == 1 + 2 * 16 + 4 * 4 + 2 * 3);
  const HtmlStreams a = preprocess("<a>Hello world</a><b>", cfg);
  const HtmlStreams b = preprocess("x", cfg);
  std::stringstream buf;
  write_record(buf, 1, a, cfg);
  write_record(buf, 0, b, cfg);
  CHECK(buf.str().size() == 2 * record_size(cfg));
  // Little-endian u16 char ids after the label byte.
  CHECK(static_cast<unsigned char>(buf.str()[1]) == '<');
  CHECK(buf.str()[2] == 0);

  int label = -1;
  HtmlStreams got;
  REQUIRE(read_record(buf, label, got, cfg));
  CHECK(label == 1);
  CHECK(got == a);
  REQUIRE(read_record(buf, label, got, cfg));
  CHECK(label == 0);
  CHECK(got == b);
  CHECK_FALSE(read_record(buf, label, got, cfg));

  std::stringstream partial;
  write_record(partial, 1, a, cfg);
  std::stringstream cut(partial.str().substr(0, record_size(cfg) - 1));
  CHECK_THROWS_AS(read_record(cut, label, got, cfg), InputError);
  CHECK_THROWS_AS(write_record(partial, 2, a, cfg), InputError);
}

TEST_CASE("config validation") {
  PreprocConfig cfg;
  cfg.word_buckets = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.char_len = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("fuzz: 10000 random pages keep every stream invariant") {
  const PreprocConfig cfg;
  HtmlFuzzer fuzz(2024);
  std::size_t nonempty_words = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string page = fuzz.page();
    const HtmlStreams s = preprocess(page, cfg);
    INFO("case " << i);
    REQUIRE(invariants_hold(s, cfg));
    REQUIRE(streams_valid(s, cfg));
    const std::string norm = normalize_html(page);
    REQUIRE(normalize_html(norm) == norm);
    if (i % 50 == 0) REQUIRE(preprocess(page, cfg) == s);
    nonempty_words += s.word_ids[0] != cfg.word_pad();
  }
  CHECK(nonempty_words > 1000);
}

TEST_CASE("runtime grows linearly with input length") {
  const PreprocConfig cfg;
  HtmlFuzzer fuzz(7);
  std::string base;
  while (base.size() < 200000) base += fuzz.page();
  auto time_of = [&](const std::string& s) {
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      volatile auto n = extract_visible_text(normalize_html(s)).size() + preprocess(s, cfg).char_ids.size();
      (void)n;
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  const double single = time_of(base);
  const double twice = time_of(base + base);
  MESSAGE("preprocess time ratio for doubled input: " << twice / single);
  WARN(twice / single < 2.5);
}

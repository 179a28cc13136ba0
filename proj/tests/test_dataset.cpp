#include <doctest.h>

#include "edgemark/csv.hpp"
#include "edgemark/dataset.hpp"
#include "edgemark/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace edgemark;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Precondition;
}

std::optional<std::size_t> line_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.line();
  }
  return std::nullopt;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("preprocess examples") {
    CHECK(preprocess("Check this   out!!! http://t.co/ab 😀") == "Check this out");
    CHECK(preprocess("") == "");
    CHECK(preprocess("plain words") == "plain words");
  }

  TEST_CASE("preprocess keeps words of mentions and hashtags") {
    CHECK(preprocess("@acme loves #rust") == "acme loves rust");
    CHECK(preprocess("don't stop") == "dont stop");
  }

  TEST_CASE("preprocess URL forms") {
    CHECK(preprocess("see https://a.b/c?d=e now") == "see now");
    CHECK(preprocess("see HTTPS://A.B now") == "see now");
    CHECK(preprocess("go www.example.com today") == "go today");
    CHECK(preprocess("prefixhttp://x.y tail") == "prefix tail");
    CHECK(preprocess("awww.nice") == "awwwnice");
    CHECK(preprocess("(www.example.com) ok") == "ok");
    CHECK(preprocess("http://only") == "");
  }

  TEST_CASE("preprocess emoji sequences") {
    CHECK(preprocess("ok 👍🏽 fine") == "ok fine");
    CHECK(preprocess("family👨\u200D👩\u200D👧time") == "familytime");
    CHECK(preprocess("flag 🇫🇷 here") == "flag here");
    CHECK(preprocess("love ❤\uFE0F you") == "love you");
    CHECK(preprocess("keycap 1\uFE0F\u20E3") == "keycap 1");
  }

  TEST_CASE("preprocess preserves letters, digits, marks and case") {
    CHECK(preprocess("Café ÜBER 42 é") == "Café ÜBER 42 é");
    CHECK(preprocess("日本語 テキスト") == "日本語 テキスト");
    CHECK(preprocess("a  b\u3000c\td\r\ne") == "a b c d e");
    CHECK(preprocess("zero\u200Bwidth") == "zerowidth");
  }

  TEST_CASE("preprocess matches the character-class oracle") {
    std::mt19937_64 rng(20240611);
    for (int i = 0; i < 2000; ++i) {
      const auto c = oracle::generate_case(rng);
      const auto got = preprocess(c.input);
      REQUIRE_MESSAGE(got == c.expected, "input: " << c.input);
    }
  }

  TEST_CASE("preprocess properties") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 2000; ++i) {
      const auto c = oracle::generate_case(rng);
      const auto once = preprocess(c.input);
      CHECK(preprocess(once) == once);
      CHECK_FALSE(oracle::has_url(once));
      CHECK(oracle::space_normal(once));
    }
  }

  TEST_CASE("utf8 validation") {
    CHECK(is_valid_utf8("héllo"));
    CHECK_FALSE(is_valid_utf8("\xC3"));
    CHECK_FALSE(is_valid_utf8("\xED\xA0\x80"));  // encoded surrogate
    CHECK_FALSE(is_valid_utf8("\xC0\xAF"));      // overlong
  }

  TEST_CASE("three-row dataset") {
    const auto ds = parse_dataset("id,text,label\n1,good,positive\n2,meh,neutral\n3,bad,negative\n", "mem");
    CHECK(ds.samples.size() == 3);
    CHECK(ds.labels_inferred);
    REQUIRE(ds.label_set.size() == 3);
    CHECK(ds.label_set[0].name == "positive");
    CHECK(ds.label_set[2].name == "negative");
    CHECK(ds.samples[1].clean_text == "meh");
  }

  TEST_CASE("label directive and declaration") {
    const std::string text = "# labels: positive, neutral, negative\nid,text,label\n1,x,negative\n";
    const auto ds = parse_dataset(text, "mem");
    CHECK_FALSE(ds.labels_inferred);
    CHECK(ds.label_set == default_polarity_labels());

    LoadOptions opts;
    opts.labels = std::vector<std::string>{"negative", "positive"};
    const auto ds2 = parse_dataset(text, "mem", opts);
    CHECK(ds2.label_set.front().name == "negative");
  }

  TEST_CASE("unknown label against a declared set") {
    const std::string text = "# labels: positive,neutral,negative\nid,text,label\n1,x,positive\n2,y,posative\n";
    CHECK(code_of([&] { parse_dataset(text, "mem"); }) == ErrorCode::UnknownLabel);
    CHECK(line_of([&] { parse_dataset(text, "mem"); }) == 4);
  }

  TEST_CASE("duplicate id reports the second occurrence") {
    const std::string text = "id,text,label\na,x,p\nb,y,p\na,z,p\n";
    CHECK(code_of([&] { parse_dataset(text, "mem"); }) == ErrorCode::MalformedRow);
    CHECK(line_of([&] { parse_dataset(text, "mem"); }) == 4);
  }

  TEST_CASE("malformed inputs") {
    CHECK(code_of([] { parse_dataset("id,text\n1,x\n", "mem"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([] { parse_dataset("id,text,label\n1,x\n", "mem"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([] { parse_dataset("id,text,label\n,x,p\n", "mem"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([] { parse_dataset("id,text,label\n1,x,\n", "mem"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([] { parse_dataset("id,text,label\n1,\"open,p\n", "mem"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([] { parse_dataset("id,text,label\n1,\xC3,p\n", "mem"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([] { parse_dataset("id,text,label\n", "mem"); }) == ErrorCode::EmptyDataset);
    CHECK(code_of([] { load_dataset("/nonexistent/edgemark.csv"); }) == ErrorCode::MissingFile);
  }

  TEST_CASE("quoted fields") {
    const auto ds = parse_dataset("id,text,label\n1,\"hello, \"\"world\"\"\nagain\",p\n2,x,p\n", "mem");
    CHECK(ds.samples[0].raw_text == "hello, \"world\"\nagain");
    CHECK(ds.samples[0].clean_text == "hello world again");
    CHECK(ds.samples[1].id == "2");
  }

  TEST_CASE("load determinism and fingerprint") {
    testing::TempDir dir;
    const auto path = dir.write("d.csv", testing::polarity_csv(30));
    const auto a = load_dataset(path);
    const auto b = load_dataset(path);
    CHECK(a == b);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint().size() == 16);
    const auto c = load_dataset(dir.write("e.csv", testing::polarity_csv(31)));
    CHECK(a.fingerprint() != c.fingerprint());
  }

  TEST_CASE("cleaning statistics") {
    const auto ds = parse_dataset("id,text,label\n1,ok,p\n2,hi!,p\n3,😀,p\n", "mem");
    const auto st = cleaning_stats(ds);
    CHECK(st.rows == 3);
    CHECK(st.rows_changed == 2);
    CHECK(st.rows_empty_after_cleaning == 1);
  }

  TEST_CASE("sample fixture loads") {
    const auto ds = load_dataset(TEST_DATA_DIR "/polarity_sample.csv");
    CHECK(ds.label_set == default_polarity_labels());
    CHECK(ds.samples.size() == 24);
  }
}

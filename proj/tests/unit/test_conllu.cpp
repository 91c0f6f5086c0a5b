#include <doctest.h>

#include "infoprobe/conllu.hpp"
#include "infoprobe/errors.hpp"
#include "support/support.hpp"

using namespace infoprobe;
using namespace infoprobe::conllu;

TEST_CASE("single token line") {
  const auto c = parse_conllu("1\tlove\tlove\tNOUN\t_\t_\t0\troot\t_\t_\n\n");
  REQUIRE(c.sentences.size() == 1);
  REQUIRE(c.sentences[0].tokens.size() == 1);
  const auto& t = c.sentences[0].tokens[0];
  CHECK(t.form == "love");
  CHECK(t.upos == "NOUN");
  CHECK(t.head == 0);
  CHECK(t.deprel == "root");
}

TEST_CASE("range line is skipped") {
  const auto c = parse_conllu(
      "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tde\tde\tADP\t_\t_\t2\tcase\t_\t_\n"
      "2\tel\tel\tDET\t_\t_\t0\troot\t_\t_\n\n");
  REQUIRE(c.token_count() == 2);
  CHECK(c.forms() == std::vector<std::string>{"de", "el"});
}

TEST_CASE("empty document") {
  CHECK(parse_conllu("").sentences.empty());
  CHECK(parse_conllu("# only a comment\n\n\n").sentences.empty());
}

TEST_CASE("fixture cases") {
  const auto cases = testsupport::load_conllu_cases(testsupport::data_dir() / "conllu_cases.txt");
  REQUIRE(cases.size() == 20);
  for (const auto& k : cases) {
    CAPTURE(k.name);
    if (k.expect_ok) {
      const auto c = parse_conllu(k.body);
      CHECK(c.sentences.size() == k.sentences);
      CHECK(c.forms() == k.forms);
    } else {
      try {
        parse_conllu(k.body);
        FAIL("no error raised");
      } catch (const ParseError& e) {
        CHECK(e.line() == k.error_line);
      }
    }
  }
}

TEST_CASE("read_conllu names the file on error") {
  const auto path = std::filesystem::temp_directory_path() / "infoprobe_bad.conllu";
  {
    std::ofstream f(path);
    f << "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\n";
  }
  try {
    read_conllu(path);
    FAIL("no error raised");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find(path.string() + ":2:") == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("pos instances keep file order") {
  const auto one = parse_conllu("1\tlove\tlove\tNOUN\t_\t_\t0\troot\t_\t_\n");
  const auto p = pos_instances(one);
  REQUIRE(p.size() == 1);
  CHECK(p[0].token == 0);
  CHECK(p[0].label == "NOUN");

  const auto two = parse_conllu(
      "1\ta\ta\tDET\t_\t_\t2\tdet\t_\t_\n2\tb\tb\tNOUN\t_\t_\t0\troot\t_\t_\n\n"
      "1\tc\tc\tVERB\t_\t_\t0\troot\t_\t_\n2\td\td\tADV\t_\t_\t1\tadvmod\t_\t_\n");
  const auto q = pos_instances(two);
  REQUIRE(q.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(q[i].token == i);
  CHECK(q[3].label == "ADV");
}

TEST_CASE("dep instances exclude roots") {
  const auto c = parse_conllu(
      "1\tlove\tlove\tVERB\t_\t_\t0\troot\t_\t_\n2\twins\twin\tVERB\t_\t_\t1\tconj\t_\t_\n");
  const auto d = dep_instances(c);
  REQUIRE(d.size() == 1);
  CHECK(d[0].child == 1);
  CHECK(d[0].head == 0);
  CHECK(d[0].label == "conj");

  const auto roots = parse_conllu("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t0\troot\t_\t_\n");
  CHECK(dep_instances(roots).empty());
}

TEST_CASE("dep instance count is tokens minus sentences") {
  const auto c = parse_conllu(
      "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n\n"
      "1\tb\tb\tX\t_\t_\t2\tdep\t_\t_\n2\tc\tc\tX\t_\t_\t0\troot\t_\t_\n3\td\td\tX\t_\t_\t2\tdep\t_\t_\n\n"
      "1\te\te\tX\t_\t_\t0\troot\t_\t_\n2\tf\tf\tX\t_\t_\t1\tdep\t_\t_\n");
  const auto d = dep_instances(c);
  CHECK(d.size() == c.token_count() - c.sentences.size());
  // Flat indices span sentences.
  CHECK(d.back().child == 5);
  CHECK(d.back().head == 4);
}

TEST_CASE("head past the sentence end is a data error") {
  const auto c = parse_conllu("1\ta\ta\tX\t_\t_\t3\tdep\t_\t_\n");
  CHECK_THROWS_AS(dep_instances(c), DataError);
}

TEST_CASE("corpus hash") {
  CHECK(corpus_token_hash(Corpus{}) == 14695981039346656037ULL);
  const auto a = parse_conllu("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n");
  CHECK(corpus_token_hash(a) == testsupport::reference_fnv("a"));
  CHECK(corpus_token_hash(a) == 0xaf63dc4c8601ec8cULL);

  const auto ab = parse_conllu("1\tx\tx\tX\t_\t_\t0\troot\t_\t_\n2\tyz\tyz\tX\t_\t_\t1\tdep\t_\t_\n\n"
                               "1\tw\tw\tX\t_\t_\t0\troot\t_\t_\n");
  const auto ba = parse_conllu("1\tw\tw\tX\t_\t_\t0\troot\t_\t_\n\n"
                               "1\tx\tx\tX\t_\t_\t0\troot\t_\t_\n2\tyz\tyz\tX\t_\t_\t1\tdep\t_\t_\n");
  CHECK(corpus_token_hash(ab) == testsupport::reference_fnv("x\nyz\nw"));
  CHECK(corpus_token_hash(ab) != corpus_token_hash(ba));
}

TEST_CASE("to_conllu round trip") {
  const auto text = testsupport::slurp(testsupport::data_dir() / "toy" / "train.conllu");
  const auto c = parse_conllu(text);
  const auto again = parse_conllu(to_conllu(c));
  CHECK(again.forms() == c.forms());
  CHECK(corpus_token_hash(again) == corpus_token_hash(c));
  CHECK(pos_instances(again).size() == pos_instances(c).size());
}

TEST_CASE("label vocab") {
  const auto v = LabelVocab::build({"VERB", "NOUN", "NOUN", "ADJ"});
  CHECK(v.labels() == std::vector<std::string>{"ADJ", "NOUN", "VERB"});
  CHECK(v.counts() == std::vector<std::size_t>{1, 2, 1});
  std::vector<std::string> unseen;
  const auto enc = v.encode({"NOUN", "X", "ADJ"}, &unseen);
  CHECK(enc == std::vector<int>{1, 3, 0});
  CHECK(unseen == std::vector<std::string>{"X"});
}

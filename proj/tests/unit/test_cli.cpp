#include <doctest.h>

#include <sstream>

#include <fmt/format.h>

#include "infoprobe/cli.hpp"
#include "infoprobe/conllu.hpp"
#include "infoprobe/embedkit.hpp"
#include "support/support.hpp"

using namespace infoprobe;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path toy(const std::string& name) { return testsupport::data_dir() / "toy" / name; }

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "infoprobe_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_pembs(const fs::path& dir, bool corrupt_test_hash) {
  for (const auto split : {conllu::Split::train, conllu::Split::dev, conllu::Split::test}) {
    const auto c = conllu::read_conllu(toy(fmt::format("{}.conllu", conllu::to_string(split))), split);
    embedkit::TokenEmbeddings e;
    e.vectors = Matrix::Constant(static_cast<Eigen::Index>(c.token_count()), 2, 0.5);
    e.corpus_hash = conllu::corpus_token_hash(c);
    if (corrupt_test_hash && split == conllu::Split::test) e.corpus_hash ^= 0xff;
    embedkit::write_embedding_matrix(e, dir / fmt::format("{}.pemb", conllu::to_string(split)));
  }
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::input_error);
  CHECK(run({"frobnicate"}).code == cli::input_error);
  CHECK(run({"estimate", "--task"}).code == cli::input_error);
  CHECK(run({"--help"}).code == cli::ok);
}

TEST_CASE("replay reproduces a table row") {
  const auto r = run({"estimate", "--replay", (testsupport::data_dir() / "table1_pos.csv").string()});
  CHECK(r.code == cli::ok);
  CHECK(r.out.find("0.16 (4.4%)") != std::string::npos);
  CHECK(r.out.find("203,762") != std::string::npos);

  const auto out = scratch("replay");
  CHECK(run({"estimate", "--replay", (testsupport::data_dir() / "table2_dep.csv").string(), "--out", out.string()})
            .code == cli::ok);
  CHECK(testsupport::slurp(out / "report.txt").find("0.55 (12.3%)") != std::string::npos);
  CHECK(testsupport::slurp(out / "report.csv").rfind("language,task,units", 0) == 0);
}

TEST_CASE("validate") {
  const auto r = run({"validate", "--config", toy("run.cfg").string()});
  CHECK(r.code == cli::ok);
  CHECK(r.out.find("train") != std::string::npos);
  CHECK(r.out.find("408") != std::string::npos);

  const auto dir = scratch("pemb");
  write_pembs(dir, false);
  CHECK(run({"validate", "--config", toy("run.cfg").string(), "--source", "contextual:" + dir.string()}).code ==
        cli::ok);

  write_pembs(dir, true);
  const auto bad = run({"validate", "--config", toy("run.cfg").string(), "--source", "contextual:" + dir.string()});
  CHECK(bad.code == cli::alignment);
  const auto test = conllu::read_conllu(toy("test.conllu"));
  const auto h = conllu::corpus_token_hash(test);
  CHECK(bad.err.find(fmt::format("{:016x}", h)) != std::string::npos);
  CHECK(bad.err.find(fmt::format("{:016x}", h ^ 0xff)) != std::string::npos);
}

TEST_CASE("parse failures carry file and line") {
  const auto dir = scratch("broken");
  fs::copy_file(toy("train.conllu"), dir / "train.conllu");
  fs::copy_file(toy("dev.conllu"), dir / "dev.conllu");
  {
    std::ofstream f(dir / "test.conllu");
    f << "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\n";
  }
  const auto r = run({"validate", "--train", (dir / "train.conllu").string(), "--dev", (dir / "dev.conllu").string(),
                      "--test", (dir / "test.conllu").string()});
  CHECK(r.code == cli::input_error);
  CHECK(r.err.find((dir / "test.conllu").string() + ":2:") != std::string::npos);
}

TEST_CASE("estimate is byte-identical across runs") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const std::vector<std::string> base{"estimate", "--config", toy("run.cfg").string(), "--trials", "2"};
  auto args_a = base;
  args_a.insert(args_a.end(), {"--out", a.string()});
  auto args_b = base;
  args_b.insert(args_b.end(), {"--out", b.string()});
  REQUIRE(run(args_a).code == cli::ok);
  REQUIRE(run(args_b).code == cli::ok);
  for (const auto* f : {"report.csv", "report.txt", "trials_fasttext.csv", "trials_onehot.csv", "trials_random.csv"}) {
    CAPTURE(f);
    CHECK(testsupport::slurp(a / f) == testsupport::slurp(b / f));
    CHECK_FALSE(testsupport::slurp(a / f).empty());
  }
  auto nats = base;
  nats.insert(nats.end(), {"--out", a.string(), "--nats"});
  REQUIRE(run(nats).code == cli::ok);
  CHECK(testsupport::slurp(a / "report.csv").find(",nats,") != std::string::npos);
}

TEST_CASE("estimate needs a source") {
  const auto r = run({"estimate", "--train", toy("train.conllu").string(), "--dev", toy("dev.conllu").string(),
                      "--test", toy("test.conllu").string()});
  CHECK(r.code == cli::input_error);
}

TEST_CASE("baseline") {
  const auto out = scratch("baseline");
  const auto r = run({"baseline", "--config", toy("run.cfg").string(), "--out", out.string()});
  CHECK(r.code == cli::ok);
  CHECK(r.out.find("memorizer accuracy 1.0000") != std::string::npos);
  CHECK(testsupport::slurp(out / "baseline.csv").find("pos,") != std::string::npos);
}

TEST_CASE("synth-validate") {
  const auto a = run({"synth-validate"});
  CHECK(a.code == cli::ok);
  CHECK(a.out.find("100 cases") != std::string::npos);
  CHECK(a.out == run({"synth-validate", "--cases", "100", "--seed", "0"}).out);
  CHECK(run({"synth-validate", "--cases", "0"}).code == cli::input_error);

  const auto dir = scratch("synth");
  {
    std::ofstream f(dir / "good.txt");
    f << "labels 2\npoints 3 1\npoint 0\npoint 1\npoint 2\nrow 0.3 0.1 0.1\nrow 0.05 0.25 0.2\nchannel 0 0 1\n";
  }
  {
    std::ofstream f(dir / "broken.txt");
    f << "labels 2\npoints 2 1\npoint 0\npoint 1\nrow 0.25 0.25\nrow 0.25 0.25\ntransition 0.5 0.4\ntransition 0 1\n";
  }
  const auto good = run({"synth-validate", "--cases", "5", "--joint", (dir / "good.txt").string(), "--out",
                         dir.string()});
  CHECK(good.code == cli::ok);
  CHECK(fs::exists(dir / "synth.csv"));
  const auto broken = run({"synth-validate", "--cases", "5", "--joint", (dir / "broken.txt").string()});
  CHECK(broken.code == cli::input_error);
  CHECK(broken.out.find("VIOLATED") == std::string::npos);
}

TEST_CASE("extract-check") {
  const auto dir = scratch("extract");
  write_pembs(dir, false);
  const auto r = run({"extract-check", "--conllu", toy("train.conllu").string(), "--pemb",
                      (dir / "train.pemb").string(), "--vec", toy("vectors.vec").string()});
  CHECK(r.code == cli::ok);
  CHECK(r.out.find("aligned") != std::string::npos);
  CHECK(r.out.find("covers 18 of 18") != std::string::npos);
  CHECK(run({"extract-check", "--conllu", toy("dev.conllu").string(), "--pemb", (dir / "train.pemb").string()})
            .code == cli::alignment);
  CHECK(run({"extract-check"}).code == cli::input_error);
}

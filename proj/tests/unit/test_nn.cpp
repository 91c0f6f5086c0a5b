#include <doctest.h>

#include <cmath>

#include "infoprobe/errors.hpp"
#include "infoprobe/nn.hpp"
#include "infoprobe/synth.hpp"
#include "support/support.hpp"

using namespace infoprobe;
using namespace infoprobe::nn;

namespace {

Probe zero_probe(std::size_t in, std::size_t classes) {
  return Probe({Layer{Matrix::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(in)),
                      Vector::Zero(static_cast<Eigen::Index>(classes))}},
               0.0, 0);
}

// Two Gaussian blobs far apart along the first axis.
Examples separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto m = std::make_shared<Matrix>(static_cast<Eigen::Index>(n), 2);
  Examples e;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    (*m)(static_cast<Eigen::Index>(i), 0) = (label ? 2.0 : -2.0) + uniform(rng, -0.5, 0.5);
    (*m)(static_cast<Eigen::Index>(i), 1) = uniform(rng, -1, 1);
    e.rows.push_back(i);
    e.labels.push_back(label);
  }
  e.features = m;
  return e;
}

}  // namespace

TEST_CASE("hidden widths") {
  CHECK(hidden_widths(1, 64, 16).empty());
  CHECK(hidden_widths(3, 128, 16) == std::vector<std::size_t>{128, 64});
  CHECK(hidden_widths(4, 20, 16) == std::vector<std::size_t>{20, 16, 16});
}

TEST_CASE("init shapes") {
  ProbeConfig c;
  c.layers = 1;
  auto p1 = init_probe(c, 300, 16, 1);
  REQUIRE(p1.layer_count() == 1);
  CHECK(p1.layers()[0].weight.rows() == 16);
  CHECK(p1.layers()[0].weight.cols() == 300);

  c.layers = 3;
  c.base_width = 128;
  auto p3 = init_probe(c, 300, 16, 1);
  REQUIRE(p3.layer_count() == 3);
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes{{128, 300}, {64, 128}, {16, 64}};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(p3.layers()[i].weight.rows() == shapes[i].first);
    CHECK(p3.layers()[i].weight.cols() == shapes[i].second);
    CHECK(p3.layers()[i].bias.isZero());
  }
  CHECK(p3.parameter_count() == 128 * 300 + 128 + 64 * 128 + 64 + 16 * 64 + 16);

  // Glorot bound sqrt(6 / (in + out)).
  CHECK(p3.layers()[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (300 + 128)));
  CHECK_THROWS_AS(init_probe(c, 3, 1, 1), InvalidArgument);
}

TEST_CASE("zero probe is uniform") {
  auto p = zero_probe(3, 4);
  Matrix x = Matrix::Random(5, 3);
  const auto lp = p.log_probs(x);
  CHECK((lp.array() - (-std::log(4.0))).abs().maxCoeff() < 1e-15);
  Batch b{x, {0, 1, 2, 3, 0}};
  CHECK(p.loss_and_grads(b).loss_bits == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("saturated logits give near-zero loss") {
  Matrix w(2, 2);
  w << 100, 0, 0, 100;
  Probe p({Layer{w, Vector::Zero(2)}}, 0.0, 0);
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  CHECK(p.loss_and_grads({x, {0, 1}}).loss_bits < 1e-3);
}

TEST_CASE("dropout only acts in train mode") {
  ProbeConfig c;
  c.layers = 2;
  c.base_width = 8;
  Matrix x = Matrix::Random(6, 3);

  auto plain = init_probe(c, 3, 2, 4);
  CHECK(plain.forward(x) == plain.log_probs(x));

  c.dropout_rate = 0.5;
  auto a = init_probe(c, 3, 2, 4);
  auto b = init_probe(c, 3, 2, 4);
  const auto fa = a.forward(x);
  CHECK(fa == b.forward(x));
  CHECK(fa != a.log_probs(x));
  a.set_mode(Mode::eval);
  CHECK(a.forward(x) == a.log_probs(x));
}

TEST_CASE("bad batches") {
  auto p = zero_probe(2, 3);
  CHECK_THROWS_AS(p.loss_and_grads({Matrix(0, 2), {}}), InvalidArgument);
  CHECK_THROWS_AS(p.loss_and_grads({Matrix::Zero(1, 2), {3}}), ShapeError);
  CHECK_THROWS_AS(p.log_probs(Matrix::Zero(1, 5)), ShapeError);
}

TEST_CASE("gradients match finite differences") {
  ProbeConfig c;
  c.layers = 2;
  c.base_width = 5;
  auto p = init_probe(c, 4, 3, 9);
  Rng rng(3);
  Batch b;
  b.inputs = Matrix(7, 4);
  for (Eigen::Index i = 0; i < 7; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) b.inputs(i, j) = uniform(rng, -1, 1);
    b.labels.push_back(static_cast<int>(uniform_index(rng, 3)));
  }
  CHECK(testsupport::gradient_check(p, b) < 1e-4);

  for (std::uint64_t s = 100; s < 105; ++s) {
    auto [probe, batch] = testsupport::random_probe_case(s);
    CHECK(testsupport::gradient_check(probe, batch) < 1e-4);
  }
}

TEST_CASE("separable data is learned") {
  const auto tr = separable(200, 1);
  const auto dv = separable(100, 2);
  ProbeConfig c;
  c.layers = 2;
  c.base_width = 16;
  TrainSettings s;
  const auto r = train(init_probe(c, 2, 2, 5), std::nullopt, tr, dv, s, 5);
  CHECK_FALSE(r.diverged);
  CHECK(r.epochs_run() <= 100);
  CHECK(r.best_dev_ce() < 0.1);
  CHECK(mean_cross_entropy_bits(r.model, dv) == doctest::Approx(r.best_dev_ce()).epsilon(1e-12));
}

TEST_CASE("label noise keeps the loss near one bit") {
  // T independent of R, p(t) uniform over 2: H(T|R) = 1 bit.
  Matrix probs(2, 4);
  probs.setConstant(0.125);
  Matrix support(4, 2);
  support << 0, 0, 0, 1, 1, 0, 1, 1;
  const auto joint = synth::make_joint(probs, support);
  const auto tr = synth::to_examples(synth::sample(joint, 4000, 1), joint.r_support);
  const auto dv = synth::to_examples(synth::sample(joint, 4000, 2), joint.r_support);
  ProbeConfig c;
  c.layers = 2;
  c.base_width = 32;
  const auto r = train(init_probe(c, 2, 2, 3), std::nullopt, tr, dv, TrainSettings{}, 3);
  CHECK(r.best_dev_ce() >= 1.0 - 0.05);
}

TEST_CASE("early stopping returns the best epoch") {
  const auto tr = separable(40, 3);
  // Dev labels flipped, so dev loss rises as the probe learns.
  auto dv = separable(40, 4);
  for (auto& l : dv.labels) l = 1 - l;
  TrainSettings s;
  s.patience = 3;
  s.learning_rate = 0.05;
  ProbeConfig c;
  const auto r = train(init_probe(c, 2, 2, 1), std::nullopt, tr, dv, s, 1);
  const auto it = std::min_element(r.dev_ce.begin(), r.dev_ce.end());
  CHECK(r.best_epoch == static_cast<std::size_t>(it - r.dev_ce.begin()));
  CHECK(r.epochs_run() == r.best_epoch + 1 + s.patience);
  CHECK(mean_cross_entropy_bits(r.model, dv) == doctest::Approx(*it).epsilon(1e-12));
}

TEST_CASE("training is seed-deterministic") {
  const auto tr = separable(64, 1);
  ProbeConfig c;
  c.layers = 2;
  c.base_width = 8;
  c.dropout_rate = 0.3;
  TrainSettings s;
  s.max_epochs = 5;
  const auto a = train(init_probe(c, 2, 2, 7), std::nullopt, tr, tr, s, 7);
  const auto b = train(init_probe(c, 2, 2, 7), std::nullopt, tr, tr, s, 7);
  CHECK(a.dev_ce == b.dev_ce);
  CHECK(encode_model(a.model) == encode_model(b.model));
}

TEST_CASE("trainable embedding is updated") {
  auto table = std::make_shared<Matrix>(Matrix::Zero(3, 2));
  (*table)(0, 0) = 0.1;
  (*table)(1, 0) = -0.1;
  Examples ex{table, 1, {0, 1, 0, 1}, {0, 1, 0, 1}};
  ProbeConfig c;
  TrainSettings s;
  s.max_epochs = 30;
  s.learning_rate = 0.05;
  s.patience = 30;
  const auto r = train(init_probe(c, 2, 2, 1), *table, ex, ex, s, 1);
  REQUIRE(r.model.embedding);
  CHECK(r.model.embedding->row(0) != table->row(0));
  // Row 2 is never looked up, so it keeps its value.
  CHECK(r.model.embedding->row(2) == table->row(2));
  CHECK(r.best_dev_ce() < 0.5);
}

TEST_CASE("checkpoint round trip") {
  ProbeConfig c;
  c.layers = 3;
  c.base_width = 6;
  c.dropout_rate = 0.25;
  Model m{init_probe(c, 4, 3, 2), Matrix::Random(5, 4)};
  const auto bytes = encode_model(m);
  CHECK(bytes.substr(0, 4) == "PPRB");
  const auto back = decode_model(bytes);
  CHECK(encode_model(back) == bytes);
  CHECK(back.probe.dropout_rate() == 0.25);
  CHECK(*back.embedding == *m.embedding);

  const auto path = std::filesystem::temp_directory_path() / "infoprobe_model.pprb";
  save_model(m, path);
  CHECK(encode_model(load_model(path)) == bytes);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(decode_model("XXXX"), FormatError);
  CHECK_THROWS_AS(decode_model(bytes.substr(0, bytes.size() - 3)), FormatError);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "infoprobe/matrix.hpp"
#include "infoprobe/nn.hpp"
#include "infoprobe/rng.hpp"

namespace testsupport {

inline std::filesystem::path data_dir() { return INFOPROBE_TEST_DATA; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reference FNV-1a 64, written out from the published constants.
inline std::uint64_t reference_fnv(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a) + std::abs(b), 1e-8);
  return std::abs(a - b) / scale;
}

/// Largest relative error between backprop and central differences over
/// every weight, bias and input of a dropout-free probe.
inline double gradient_check(infoprobe::nn::Probe& probe, const infoprobe::nn::Batch& batch, double h = 1e-5) {
  const auto analytic = probe.loss_and_grads(batch);
  auto loss = [&] { return probe.loss_and_grads(batch).loss_bits; };
  double worst = 0.0;
  auto& layers = probe.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].weight;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double keep = w(i, j);
        w(i, j) = keep + h;
        const double up = loss();
        w(i, j) = keep - h;
        const double down = loss();
        w(i, j) = keep;
        worst = std::max(worst, relative_error(analytic.grads.weights[l](i, j), (up - down) / (2 * h)));
      }
    }
    auto& b = layers[l].bias;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const double keep = b(i);
      b(i) = keep + h;
      const double up = loss();
      b(i) = keep - h;
      const double down = loss();
      b(i) = keep;
      worst = std::max(worst, relative_error(analytic.grads.biases[l](i), (up - down) / (2 * h)));
    }
  }
  auto shifted = batch;
  for (Eigen::Index i = 0; i < shifted.inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < shifted.inputs.cols(); ++j) {
      const double keep = shifted.inputs(i, j);
      shifted.inputs(i, j) = keep + h;
      const double up = probe.loss_and_grads(shifted).loss_bits;
      shifted.inputs(i, j) = keep - h;
      const double down = probe.loss_and_grads(shifted).loss_bits;
      shifted.inputs(i, j) = keep;
      worst = std::max(worst, relative_error(analytic.grads.inputs(i, j), (up - down) / (2 * h)));
    }
  }
  return worst;
}

/// Random dropout-free probe and batch for gradient checks.
inline std::pair<infoprobe::nn::Probe, infoprobe::nn::Batch> random_probe_case(std::uint64_t seed) {
  infoprobe::Rng rng(seed);
  infoprobe::nn::ProbeConfig c;
  c.layers = static_cast<int>(infoprobe::uniform_int(rng, 1, 3));
  c.base_width = static_cast<int>(infoprobe::uniform_int(rng, 3, 8));
  c.dropout_rate = 0.0;
  const auto in = static_cast<std::size_t>(infoprobe::uniform_int(rng, 2, 5));
  const auto classes = static_cast<std::size_t>(infoprobe::uniform_int(rng, 2, 4));
  auto probe = infoprobe::nn::init_probe(c, in, classes, seed);
  for (auto& layer : probe.layers()) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = infoprobe::uniform(rng, -0.5, 0.5);
  }
  infoprobe::nn::Batch batch;
  const auto n = static_cast<Eigen::Index>(infoprobe::uniform_int(rng, 1, 6));
  batch.inputs.resize(n, static_cast<Eigen::Index>(in));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < batch.inputs.cols(); ++j) batch.inputs(i, j) = infoprobe::uniform(rng, -2, 2);
    batch.labels.push_back(static_cast<int>(infoprobe::uniform_index(rng, classes)));
  }
  return {std::move(probe), std::move(batch)};
}

/// One case of the CoNLL-U fixture file: "=== name", "expect ...", body.
struct ConlluCase {
  std::string name;
  bool expect_ok = true;
  std::size_t sentences = 0;
  std::vector<std::string> forms;
  std::size_t error_line = 0;
  std::string body;
};

inline std::vector<ConlluCase> load_conllu_cases(const std::filesystem::path& path) {
  std::vector<ConlluCase> cases;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("=== ", 0) == 0) {
      cases.push_back({});
      cases.back().name = line.substr(4);
      std::getline(in, line);
      std::istringstream ex(line);
      std::string word, kind;
      ex >> word >> kind;
      auto& c = cases.back();
      c.expect_ok = kind == "ok";
      while (ex >> word) {
        const auto eq = word.find('=');
        const auto key = word.substr(0, eq);
        const auto value = word.substr(eq + 1);
        if (key == "sentences") c.sentences = std::stoul(value);
        if (key == "line") c.error_line = std::stoul(value);
        if (key == "forms") {
          std::istringstream fs(value);
          std::string f;
          while (std::getline(fs, f, ',')) c.forms.push_back(f);
        }
      }
      continue;
    }
    if (!cases.empty()) cases.back().body += line + "\n";
  }
  return cases;
}

}  // namespace testsupport

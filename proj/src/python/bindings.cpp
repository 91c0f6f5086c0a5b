#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "infoprobe/cli.hpp"
#include "infoprobe/conllu.hpp"
#include "infoprobe/embedkit.hpp"
#include "infoprobe/errors.hpp"
#include "infoprobe/estimator.hpp"
#include "infoprobe/synth.hpp"

namespace py = pybind11;
using namespace infoprobe;

PYBIND11_MODULE(_infoprobe, m) {
  m.doc() = "Information-theoretic probing toolkit";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<FormatError>(m, "FormatError", error);
  auto alignment = py::register_exception<AlignmentError>(m, "AlignmentError", error);
  py::register_exception<HashMismatchError>(m, "HashMismatchError", alignment);
  py::register_exception<CountMismatchError>(m, "CountMismatchError", alignment);
  py::register_exception<DataError>(m, "DataError", error);
  py::register_exception<ShapeError>(m, "ShapeError", error);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error);
  py::register_exception<SearchFailure>(m, "SearchFailure", error);

  m.def("fnv1a64", [](py::bytes b) { return conllu::fnv1a64(std::string(b)); });

  // Corpus-level helpers take CoNLL-U text.
  m.def("conllu_forms", [](const std::string& text) {
    const auto c = conllu::parse_conllu(text);
    std::vector<std::vector<std::string>> out;
    for (const auto& s : c.sentences) {
      auto& row = out.emplace_back();
      for (const auto& t : s.tokens) row.push_back(t.form);
    }
    return out;
  });
  m.def("corpus_token_hash", [](const std::string& text) {
    return conllu::corpus_token_hash(conllu::parse_conllu(text));
  });

  m.def("encode_pemb", [](const Matrix& vectors, std::uint64_t corpus_hash) {
    embedkit::TokenEmbeddings e;
    e.vectors = vectors;
    e.corpus_hash = corpus_hash;
    return py::bytes(embedkit::encode_pemb(e));
  });
  m.def("decode_pemb", [](py::bytes b) {
    const auto e = embedkit::decode_pemb(std::string(b));
    return py::make_tuple(Matrix(e.vectors), e.corpus_hash);
  });

  m.def("plugin_entropy", [](const std::vector<std::size_t>& counts) {
    return estimator::plugin_entropy(counts).value;
  }, "Plug-in entropy in bits of a count vector.");

  m.def("true_quantities", [](const Matrix& probs) {
    const auto q = synth::true_quantities(synth::make_joint(probs, Matrix::Identity(probs.cols(), probs.cols())));
    py::dict d;
    d["h_t"] = q.h_t;
    d["h_t_given_r"] = q.h_t_given_r;
    d["mi"] = q.mi;
    return d;
  }, py::arg("probs"), "Exact H(T), H(T|R) and I(T;R) of a labels x values joint.");

  m.def("conditional_mi", [](const Matrix& probs, const std::vector<std::size_t>& mapping, std::size_t outputs) {
    const auto j = synth::make_joint(probs, Matrix::Identity(probs.cols(), probs.cols()));
    return synth::conditional_mi(j, synth::Channel::deterministic(mapping, outputs));
  });

  m.def("run_sweep", [](std::size_t cases, std::uint64_t seed) {
    const auto s = synth::run_sweep(cases, seed);
    py::dict d;
    d["cases"] = s.cases.size();
    d["passed"] = s.passed();
    d["worst_dpi_violation"] = s.worst_dpi_violation;
    d["worst_prop1_error"] = s.worst_prop1_error;
    d["worst_identity_error"] = s.worst_identity_error;
    d["bound_violations"] = s.bound_violations;
    return d;
  }, py::arg("cases") = 100, py::arg("seed") = 0);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "Runs the command-line tool in process; returns (exit_code, stdout, stderr).");
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kpset/assignment.hpp"
#include "kpset/config.hpp"
#include "kpset/corpus.hpp"
#include "kpset/metrics.hpp"
#include "kpset/reassign.hpp"
#include "kpset/synthetic.hpp"
#include "kpset/textnorm.hpp"
#include "kpset/trainer.hpp"

namespace py = pybind11;

namespace {

kpset::CostMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  kpset::CostMatrix c(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != m) {
      throw std::invalid_argument("ragged cost matrix");
    }
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return c;
}

kpset::TrainConfig make_config(const std::map<std::string, std::string>& overrides) {
  kpset::TrainConfig cfg;
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Set-based keyphrase generation core";

  m.def("porter_stem", [](const std::string& w) { return kpset::porter_stem(w); });
  m.def("tokenize", [](const std::string& text) { return kpset::tokenize(text); });
  m.def("join_stems", [](const std::string& p) { return kpset::join_stems(p); });

  m.def("hungarian", [](const std::vector<std::vector<double>>& c) { return kpset::hungarian(to_matrix(c)); });
  m.def("brute_force_assign",
        [](const std::vector<std::vector<double>>& c) { return kpset::brute_force_assign(to_matrix(c)); });

  m.def(
      "lambda_adp",
      [](const std::vector<std::pair<double, double>>& pairs) {
        std::vector<kpset::WeightInput> in;
        for (std::size_t i = 0; i < pairs.size(); ++i) in.push_back({i, pairs[i].first, pairs[i].second});
        return kpset::compute_lambda_adp(in).lambda_adp;
      },
      py::arg("pairs"), "Adaptive weight from (p_first_token, p_null) pairs of keyphrase-assigned slots.");

  m.def("dedup_stemmed", &kpset::dedup_stemmed);
  m.def("f1_at_m", &kpset::f1_at_m);
  m.def("f1_at_5", &kpset::f1_at_5);

  m.def(
      "gen_synthetic",
      [](std::uint64_t seed, std::size_t size) {
        return kpset::synthetic_to_jsonl(kpset::gen_synthetic(seed, size, kpset::default_grammar()));
      },
      py::arg("seed"), py::arg("size"));

  m.def("config_keys", &kpset::config_keys);
  m.def(
      "train",
      [](const std::string& corpus, const std::string& out_dir, const std::map<std::string, std::string>& cfg) {
        py::gil_scoped_release release;
        const auto res = kpset::train(make_config(cfg), corpus, out_dir);
        return res.step_losses;
      },
      py::arg("corpus"), py::arg("out_dir"), py::arg("config") = std::map<std::string, std::string>{},
      "Trains and returns the per-step mean losses.");
  m.def(
      "evaluate_json",
      [](const std::string& ckpt, const std::string& corpus) {
        py::gil_scoped_release release;
        return kpset::report_json(kpset::evaluate(ckpt, corpus));
      },
      py::arg("checkpoint"), py::arg("corpus"));
  m.def(
      "diagnose_json",
      [](const std::string& ckpt, const std::string& log, const std::string& corpus) {
        py::gil_scoped_release release;
        return kpset::diagnose(ckpt, log, corpus).dump();
      },
      py::arg("checkpoint"), py::arg("log"), py::arg("corpus"));
}

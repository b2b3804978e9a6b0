#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <fmt/format.h>

#include "cli.hpp"
#include "hoir/agents.hpp"
#include "hoir/cliploss.hpp"
#include "hoir/eval.hpp"
#include "hoir/fusion.hpp"
#include "hoir/ingest.hpp"
#include "hoir/prompt.hpp"

namespace py = pybind11;
using namespace hoir;

namespace {

py::dict recall_dict(const RecallReport& report) {
  py::dict out;
  for (const auto& [k, v] : report.percent) out[py::int_(k)] = v;
  return out;
}

}  // namespace

PYBIND11_MODULE(_hoir, m) {
  m.doc() = "Core routines of the interaction refinement toolkit";

  py::register_exception<Error>(m, "HoirError", PyExc_ValueError);

  py::class_<FusionWeights>(m, "FusionWeights")
      .def(py::init<>())
      .def(py::init([](double cs, double s, double t, double debate, double threshold) {
             FusionWeights w{cs, s, t, debate, threshold};
             w.validate();
             return w;
           }),
           py::arg("lambda_cs") = 0.05, py::arg("lambda_s") = 1.7, py::arg("lambda_t") = 1.7,
           py::arg("lambda_debate") = 0.2, py::arg("threshold") = 0.3)
      .def_readwrite("lambda_cs", &FusionWeights::lambda_cs)
      .def_readwrite("lambda_s", &FusionWeights::lambda_s)
      .def_readwrite("lambda_t", &FusionWeights::lambda_t)
      .def_readwrite("lambda_debate", &FusionWeights::lambda_debate)
      .def_readwrite("threshold", &FusionWeights::threshold)
      .def("__repr__", [](const FusionWeights& w) {
        return fmt::format("FusionWeights(lambda_cs={}, lambda_s={}, lambda_t={}, lambda_debate={}, threshold={})",
                           w.lambda_cs, w.lambda_s, w.lambda_t, w.lambda_debate, w.threshold);
      });

  m.def("sigmoid", &sigmoid, py::arg("x"));
  m.def(
      "fuse_scores",
      [](double s_inter, std::optional<double> cs, std::optional<double> spatial, std::optional<double> temporal,
         std::optional<double> debate, const FusionWeights& weights) {
        return fuse_scores(s_inter, AgentScores{cs, spatial, temporal, debate}, weights);
      },
      py::arg("s_inter"), py::kw_only(), py::arg("cs") = py::none(), py::arg("spatial") = py::none(),
      py::arg("temporal") = py::none(), py::arg("debate") = py::none(), py::arg("weights") = FusionWeights{},
      "Base score plus the weighted logistic of every agent score given.");
  m.def("threshold_select", &threshold_select, py::arg("pair_scores"), py::arg("threshold"));

  m.def("select_keyframes", &select_keyframes, py::arg("frame_indices"), py::arg("interval"));
  m.def("triplet_text", &triplet_text, py::arg("relation"), py::arg("object_class"));
  m.def("render_common_sense", [](const std::vector<std::string>& tests) { return render_common_sense(tests).render(); },
        py::arg("tests"));
  m.def(
      "parse_score_output",
      [](std::string_view raw, std::size_t n) {
        auto parsed = parse_score_output(raw, n);
        return py::make_tuple(parsed.values, parsed.warnings);
      },
      py::arg("raw"), py::arg("n_tests"), "Returns (values, warnings); unparseable slots are None.");
  m.def("parse_binary_output", &parse_binary_output, py::arg("raw"));

  m.def(
      "pair_distance",
      [](std::string_view metric, const Eigen::VectorXd& f, const Eigen::VectorXd& e) {
        auto d = pair_distance(parse_metric(metric), f, e);
        return py::make_tuple(d.value, d.grad);
      },
      py::arg("metric"), py::arg("f"), py::arg("e"), "Returns (value, gradient with respect to f).");
  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::string_view metric, double h) {
        auto m_ = parse_metric(metric);
        auto batch = random_embedding_batch(4, 8, 8, m_, seed);
        auto params = MlpParams::random({24, 16, 8}, {Activation::tanh, Activation::identity}, seed + 1000);
        return finite_diff_check(params, batch, m_, h);
      },
      py::arg("seed"), py::arg("metric") = "neg_cosine", py::arg("h") = 1e-5,
      "Largest relative finite-difference error on a seeded random batch.");
  m.def("clip_text_template", &clip_text_template, py::arg("relation"), py::arg("object_class"));

  m.def(
      "evaluate",
      [](const std::filesystem::path& predictions, const std::filesystem::path& gt,
         const std::filesystem::path& vocab, double threshold, const std::vector<int>& ks) {
        auto set = load_predictions(predictions, load_vocabulary(vocab));
        auto truth = load_ground_truth(gt, set);
        return recall_dict(recall_at_k_dataset(set, base_scores(set), truth, threshold, ks));
      },
      py::arg("predictions"), py::arg("gt"), py::arg("vocab"), py::arg("threshold") = 0.3,
      py::arg("ks") = kDefaultKs, "Recall@K in percent, keyed by K.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command line; returns (exit code, stdout, stderr).");
}

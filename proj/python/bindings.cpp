#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "motionbeat/align.hpp"
#include "motionbeat/attention.hpp"
#include "motionbeat/beat_grid.hpp"
#include "motionbeat/checkpoint.hpp"
#include "motionbeat/cli.hpp"
#include "motionbeat/config.hpp"
#include "motionbeat/dataset.hpp"
#include "motionbeat/errors.hpp"
#include "motionbeat/metrics.hpp"
#include "motionbeat/objectives.hpp"
#include "motionbeat/synthetic.hpp"
#include "motionbeat/tokens.hpp"
#include "motionbeat/trainer.hpp"

#include <sstream>

namespace py = pybind11;
using namespace motionbeat;

namespace {

py::dict alignment_dict(const AlignmentResult& r) {
  py::dict d;
  d["value"] = r.value;
  d["grad_a"] = r.grad_a;
  d["grad_b"] = r.grad_b;
  return d;
}

py::dict retrieval_dict(const RetrievalReport& r) {
  py::dict d;
  d["direction"] = to_string(r.direction);
  d["recall_at"] = r.recall_at;
  d["median_rank"] = r.median_rank;
  d["ranks"] = r.ranks;
  return d;
}

RetrievalDirection parse_direction(const std::string& s) {
  if (s == "music_to_motion") return RetrievalDirection::music_to_motion;
  if (s == "motion_to_music") return RetrievalDirection::motion_to_music;
  throw DomainError("direction must be music_to_motion or motion_to_music");
}

}  // namespace

PYBIND11_MODULE(_motionbeat, m) {
  m.doc() = "Beat-synchronous music-motion representation learning";
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<BeatGrid>(m, "BeatGrid")
      .def_readonly("bpm", &BeatGrid::bpm)
      .def_readonly("bar_len", &BeatGrid::bar_len)
      .def_readonly("num_beats", &BeatGrid::num_beats)
      .def_readonly("phase_offset", &BeatGrid::phase_offset)
      .def_readonly("boundaries", &BeatGrid::boundaries)
      .def("bar_position", &BeatGrid::bar_position);
  m.def("build_beat_grid", &build_beat_grid, py::arg("bpm"), py::arg("bar_len"), py::arg("num_beats"),
        py::arg("phase_offset") = 0);
  m.def(
      "bar_mass",
      [](const std::vector<double>& values, const BeatGrid& grid) { return bar_mass(values, grid); },
      py::arg("values"), py::arg("grid"));

  m.def(
      "soft_dtw",
      [](const std::vector<double>& a, const std::vector<double>& b, double gamma) {
        return alignment_dict(soft_dtw(a, b, {gamma}));
      },
      py::arg("a"), py::arg("b"), py::arg("gamma") = 0.1);
  m.def(
      "hard_dtw", [](const std::vector<double>& a, const std::vector<double>& b) { return hard_dtw_oracle(a, b); },
      py::arg("a"), py::arg("b"));
  m.def(
      "emd_1d",
      [](const std::vector<double>& p, const std::vector<double>& q) { return alignment_dict(emd_1d(p, q)); },
      py::arg("p"), py::arg("q"));

  m.def("bar_phase", &bar_phase, py::arg("t"), py::arg("bar_len"));
  m.def(
      "phase_rotate", [](const std::vector<double>& v, double phi) { return phase_rotate(v, phi); }, py::arg("vec"),
      py::arg("phi"));
  m.def(
      "contact_attention",
      [](const Matrix& q, const Matrix& k, const Matrix& v, const std::vector<double>& contacts, double alpha_logit,
         double alpha_val) {
        const AttentionOutput o = contact_attention(q, k, v, contacts, alpha_logit, alpha_val);
        return py::make_tuple(o.output, o.weights);
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("contacts"), py::arg("alpha_logit") = 0.0,
      py::arg("alpha_val") = 0.0);

  m.def(
      "info_nce",
      [](const Matrix& anchors, const Matrix& positives, double tau) {
        return ecl_loss(anchors, positives, in_batch_negatives(static_cast<int>(anchors.rows())), tau).value;
      },
      py::arg("anchors"), py::arg("positives"), py::arg("tau") = 0.07);
  m.def("total_loss", &total_loss, py::arg("ecl"), py::arg("sral"), py::arg("alpha") = 0.2);

  m.def(
      "eval_retrieval",
      [](const Matrix& audio, const Matrix& motion, const std::string& direction) {
        return retrieval_dict(eval_retrieval(audio, motion, parse_direction(direction)));
      },
      py::arg("audio"), py::arg("motion"), py::arg("direction") = "music_to_motion");
  m.def(
      "beat_alignment_score",
      [](const std::vector<double>& music, const std::vector<double>& motion, double sigma) {
        return beat_alignment_score(music, motion, sigma);
      },
      py::arg("music_beats"), py::arg("motion_beats"), py::arg("sigma") = 0.1);

  m.def(
      "generate_dataset",
      [](const std::string& spec_json, int count, const std::filesystem::path& out) {
        write_dataset(out, generate_dataset(dataset_spec_from_json(spec_json), count));
      },
      py::arg("spec_json"), py::arg("count"), py::arg("out"));
  m.def(
      "embed",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& dataset) {
        const MotionBeatModel model = load_checkpoint(checkpoint);
        const Dataset data = read_dataset(dataset);
        std::vector<int> idx(data.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        const Embeddings e = embed_clips(model, data, idx);
        return py::make_tuple(e.audio, e.motion);
      },
      py::arg("checkpoint"), py::arg("dataset"));
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}

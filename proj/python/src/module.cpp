#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "sc2t/clustering.hpp"
#include "sc2t/dataset.hpp"
#include "sc2t/error.hpp"
#include "sc2t/model.hpp"
#include "sc2t/pipeline.hpp"
#include "sc2t/realign.hpp"

namespace py = pybind11;
using namespace sc2t;
using nn::Tensor;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const Array& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-d array");
  Tensor t({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.data().data());
  return t;
}

SampleSet samples_of(const Sc2tModel& model, const std::vector<std::string>& texts) {
  return build_corpus(texts, model.config().window()).samples;
}

py::list tokenize(const std::string& text) {
  py::list lines;
  for (const auto& line : tokenize_document(text).lines) {
    py::list toks;
    for (const auto& t : line) toks.append(py::make_tuple(t.text, t.start_col, t.end_col));
    lines.append(toks);
  }
  return lines;
}

}  // namespace

PYBIND11_MODULE(_sc2t, m) {
  m.doc() = "Self-supervised character-and-context token embeddings for plain-text tables";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("tokenize", &tokenize, py::arg("text"), "Tokens of every line as (text, start_col, end_col).");

  py::class_<LabeledDocument>(m, "Document")
      .def(py::init<>())
      .def(py::init([](std::string id, std::vector<std::string> lines, std::vector<std::vector<std::string>> labels) {
             return LabeledDocument{std::move(id), std::move(lines), std::move(labels)};
           }),
           py::arg("id"), py::arg("lines"), py::arg("labels"))
      .def_readwrite("id", &LabeledDocument::id)
      .def_readwrite("lines", &LabeledDocument::lines)
      .def_readwrite("labels", &LabeledDocument::labels)
      .def_property_readonly("text", &LabeledDocument::text)
      .def_property_readonly("token_count", &LabeledDocument::token_count)
      .def("__repr__", [](const LabeledDocument& d) {
        return "<Document " + d.id + ": " + std::to_string(d.lines.size()) + " lines>";
      });

  m.def(
      "synthesize",
      [](const std::string& csv_path, std::size_t invoices) {
        return synthesize_messages(load_retail_csv(csv_path), invoices);
      },
      py::arg("csv_path"), py::arg("invoices") = 1000, "One labelled message per invoice of an Online Retail CSV.");
  m.def(
      "synthesize_text",
      [](const std::string& csv_text, std::size_t invoices) {
        std::istringstream is(csv_text);
        return synthesize_messages(load_retail_csv(is), invoices);
      },
      py::arg("csv_text"), py::arg("invoices") = 0);
  m.def(
      "disrupt",
      [](const std::vector<LabeledDocument>& docs, double del_pct, double cr_pct, std::uint64_t seed) {
        return disrupt_corpus(docs, DisruptionSpec{del_pct, cr_pct, seed});
      },
      py::arg("docs"), py::arg("del_pct") = 0.0, py::arg("cr_pct") = 0.0, py::arg("seed") = 0);
  m.def(
      "token_labels",
      [](const std::vector<LabeledDocument>& docs) {
        std::vector<std::string> out;
        for (const auto& d : docs) {
          for (const auto& line : d.labels) out.insert(out.end(), line.begin(), line.end());
        }
        return out;
      },
      py::arg("docs"), "Ground-truth labels in the row order of Model.embed.");

  py::class_<Sc2tConfig>(m, "Config")
      .def(py::init<>())
      .def_readwrite("s_e", &Sc2tConfig::s_e)
      .def_readwrite("ch_e", &Sc2tConfig::ch_e)
      .def_readwrite("l_t", &Sc2tConfig::l_t)
      .def_readwrite("h_w", &Sc2tConfig::h_w)
      .def_readwrite("v_w", &Sc2tConfig::v_w)
      .def_readwrite("n_f", &Sc2tConfig::n_f)
      .def_readwrite("filter_width", &Sc2tConfig::filter_width)
      .def_readwrite("char_fc_units", &Sc2tConfig::char_fc_units)
      .def_readwrite("dropout_inner", &Sc2tConfig::dropout_inner)
      .def_readwrite("dropout_merge", &Sc2tConfig::dropout_merge)
      .def_readwrite("seed", &Sc2tConfig::seed)
      .def_property_readonly("embedding_dim", &Sc2tConfig::embedding_dim)
      .def("validate", &Sc2tConfig::validate);

  py::class_<Sc2tModel>(m, "Model")
      .def(py::init([](const Sc2tConfig& cfg) { return Sc2tModel(cfg); }), py::arg("config") = Sc2tConfig{})
      .def_property_readonly("config", &Sc2tModel::config)
      .def_property_readonly("embedding_dim", &Sc2tModel::embedding_dim)
      .def_property_readonly("parameter_count", &Sc2tModel::parameter_count)
      .def(
          "train",
          [](Sc2tModel& self, const std::vector<std::string>& texts, std::size_t epochs, std::size_t batch, double lr,
             std::uint64_t seed) {
            const SampleSet samples = samples_of(self, texts);
            TrainOptions opt;
            opt.epochs = epochs;
            opt.batch = batch;
            opt.lr = lr;
            opt.seed = seed;
            py::gil_scoped_release release;
            return self.train(samples, opt).epoch_loss;
          },
          py::arg("texts"), py::arg("epochs") = 10, py::arg("batch") = 128, py::arg("lr") = 1e-3, py::arg("seed") = 1,
          "Trains on documents (plain text); returns the mean loss of every epoch.")
      .def(
          "embed",
          [](Sc2tModel& self, const std::vector<std::string>& texts, std::optional<double> k, std::size_t threads) {
            const SampleSet samples = samples_of(self, texts);
            Tensor emb;
            {
              py::gil_scoped_release release;
              emb = embed_corpus(self, samples, k, threads);
            }
            return to_numpy(emb);
          },
          py::arg("texts"), py::arg("k") = py::none(), py::arg("threads") = 1,
          "Token embeddings [tokens, ch_e + s_e] in document, line, token order; K-weighted when k is given.")
      .def(
          "realign",
          [](Sc2tModel& self, const std::string& text, bool detect_table, std::optional<double> k,
             std::uint64_t seed) { return realign_message(self, text, k, detect_table, seed).text; },
          py::arg("text"), py::arg("detect_table") = false, py::arg("k") = py::none(), py::arg("seed") = 0)
      .def("save", &Sc2tModel::save_file, py::arg("path"))
      .def_static("load", &Sc2tModel::load_file, py::arg("path"));

  m.def(
      "kmeans",
      [](const Array& points, std::size_t k, std::uint64_t seed) {
        const ClusterAssignment res = kmeans_pp(from_numpy(points), k, seed);
        py::array_t<std::uint32_t> assign(static_cast<py::ssize_t>(res.assignment.size()));
        std::copy(res.assignment.begin(), res.assignment.end(), assign.mutable_data());
        return py::make_tuple(assign, to_numpy(res.centroids), res.inertia);
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0, "k-means++; returns (assignment, centroids, inertia).");
  m.def(
      "homogeneity",
      [](const std::vector<std::uint32_t>& assignment, const std::vector<std::string>& labels) {
        return homogeneity(assignment, labels);
      },
      py::arg("assignment"), py::arg("labels"));
  m.def(
      "evaluate",
      [](const Array& points, const std::vector<std::string>& labels, const std::vector<std::size_t>& nc,
         std::size_t runs, std::uint64_t seed) {
        const Tensor pts = from_numpy(points);
        std::vector<ProtocolRow> rows;
        {
          py::gil_scoped_release release;
          rows = evaluate_protocol(pts, labels, nc, runs, seed);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["nc"] = r.nc;
          d["mean_h"] = r.mean_h;
          d["stddev_h"] = r.stddev_h;
          d["runs"] = r.runs;
          out.append(d);
        }
        return out;
      },
      py::arg("points"), py::arg("labels"), py::arg("nc") = std::vector<std::size_t>{8, 20, 100},
      py::arg("runs") = 20, py::arg("seed") = 0, "Mean homogeneity over `runs` k-means++ seeds per cluster count.");
  m.def(
      "align",
      [](const Array& line, const Array& reference) { return align_line(from_numpy(line), from_numpy(reference)); },
      py::arg("line"), py::arg("reference"), "Monotone minimum-distance map of line rows onto reference rows.");
}

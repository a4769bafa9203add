#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "ratatool/align.hpp"
#include "ratatool/corpus.hpp"
#include "ratatool/embed.hpp"
#include "ratatool/errors.hpp"
#include "ratatool/eval.hpp"
#include "ratatool/llmclient.hpp"
#include "ratatool/retrieve.hpp"
#include "ratatool/rng.hpp"
#include "ratatool/tooldesc.hpp"

namespace py = pybind11;
using namespace ratatool;

namespace {

ToolCorpus load_corpus(const std::string& path) {
    ToolCorpus corpus{std::filesystem::path(path).stem().string(), load_tools(path)};
    validate_corpus(corpus);
    return corpus;
}

std::vector<std::pair<std::string, double>> rank_text(const std::string& tools_path, const std::string& text,
                                                      std::size_t dim, std::size_t k, const std::string& format) {
    auto corpus = load_corpus(tools_path);
    LocalHashEmbedder embedder(dim);
    auto index = build_index(corpus, embedder, parse_format(format));
    auto query = hash_embed(text, dim);
    std::vector<std::pair<std::string, double>> out;
    for (const auto& s : rank_vector(query, index, k).ranking) out.emplace_back(s.tool_id, s.score);
    return out;
}

std::string evaluate_mock(const std::string& tools_path, const std::string& queries_path, double noise,
                          std::uint64_t seed, std::size_t dim, const std::string& format) {
    auto corpus = load_corpus(tools_path);
    auto queries = load_queries(queries_path);
    auto fmt = parse_format(format);
    LocalHashEmbedder embedder(dim);
    auto index = build_index(corpus, embedder, fmt);
    MockGenerator generator(corpus, noise, seed, fmt);
    return evaluate(queries, generator, index, embedder, 1).report.to_json().dump();
}

py::tuple run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full = {"ratatool"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code;
    {
        py::gil_scoped_release release;
        code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bindings for the ratatool library";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<RemoteError>(m, "RemoteError", base.ptr());

    m.def("hash_embed", [](const std::string& text, std::size_t dim) { return hash_embed(text, dim); },
          py::arg("text"), py::arg("dim") = 256, "Deterministic signed-hash embedding, L2-normalized.");
    m.def("fnv1a64", [](const std::string& s) { return fnv1a64(s); });
    m.def("canonical_json",
          [](const std::string& input, const std::string& process, const std::string& output) {
              return canonical_text(DescriptionFields{trim(input), trim(process), trim(output)}, DescriptionFormat::Json);
          },
          py::arg("input"), py::arg("process"), py::arg("output"));
    m.def("validate_tool",
          [](const std::string& raw) {
              auto f = validate_tool(raw);
              return py::dict(py::arg("input") = f.input, py::arg("process") = f.process, py::arg("output") = f.output);
          },
          py::arg("raw_json"));
    m.def("train_count", &train_count, py::arg("n"), py::arg("ratio"));
    m.def("combine_modalities",
          [](const std::vector<std::tuple<std::string, double, std::size_t>>& rows) {
              std::vector<ModalityCell> cells;
              for (const auto& [mod, acc, count] : rows) cells.push_back({parse_modality(mod), acc, count});
              auto a = combine_modalities(cells);
              return std::make_pair(a.avg_q, a.avg_m);
          },
          py::arg("cells"), "Rows of (modality, accuracy, count); returns (avg_q, avg_m).");
    m.def("dpo_loss", &dpo_loss_from_margin, py::arg("margin"));
    m.def("dpo_loss_grad", &dpo_loss_grad_wrt_margin, py::arg("margin"));
    m.def("dpo_margin",
          [](double policy_w, double ref_w, double policy_l, double ref_l, double beta) {
              DpoConfig cfg{beta};
              cfg.validate();
              return dpo_margin({"", policy_w, ref_w, policy_l, ref_l}, cfg);
          },
          py::arg("policy_logp_w"), py::arg("ref_logp_w"), py::arg("policy_logp_l"), py::arg("ref_logp_l"),
          py::arg("beta") = 0.1);
    m.def("rank_text", &rank_text, py::arg("tools_path"), py::arg("text"), py::arg("dim") = 256, py::arg("k") = 0,
          py::arg("format") = "json");
    m.def("evaluate_mock_json", &evaluate_mock, py::arg("tools_path"), py::arg("queries_path"), py::arg("noise") = 0.0,
          py::arg("seed") = 0, py::arg("dim") = 256, py::arg("format") = "json");
    m.def("run_cli", &run_cli, py::arg("args"), "Runs the command-line tool in-process; returns (code, stdout, stderr).");
}

#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "csifb/calibration.hpp"
#include "csifb/channel.hpp"
#include "csifb/parametric.hpp"
#include "csifb/probing.hpp"

namespace csifb {

// JSON artifact schemas. Matrices serialize as row-major [re, im] pairs;
// doubles round-trip exactly (shortest-representation printing).

using json = nlohmann::ordered_json;

inline json matrix_to_json(const ComplexMatrix& m) {
    json entries = json::array();
    for (const auto& z : m.data()) entries.push_back(json::array({z.real(), z.imag()}));
    return entries;
}

inline ComplexMatrix matrix_from_json(const json& entries, std::size_t rows, std::size_t cols) {
    if (entries.size() != rows * cols)
        throw std::invalid_argument("matrix_from_json: entry count mismatch");
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < entries.size(); ++i)
        m.data()[i] = cplx{entries[i][0].get<double>(), entries[i][1].get<double>()};
    return m;
}

inline json cvec_to_json(const std::vector<cplx>& v) {
    json out = json::array();
    for (const auto& z : v) out.push_back(json::array({z.real(), z.imag()}));
    return out;
}

inline std::vector<cplx> cvec_from_json(const json& j) {
    std::vector<cplx> v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v[i] = cplx{j[i][0].get<double>(), j[i][1].get<double>()};
    return v;
}

// ---- site models -----------------------------------------------------

inline json site_to_json(const SitePropagationModel& s) {
    return json{{"site_id", s.site_id},
                {"cluster_centers", s.cluster_centers},
                {"cluster_angular_spread", s.cluster_angular_spread},
                {"cluster_power_fractions", s.cluster_power_fractions},
                {"paths_per_ue_range", json::array({s.paths_per_ue_min, s.paths_per_ue_max})},
                {"shadowing_log_variance", s.shadowing_log_variance},
                {"min_path_separation", s.min_path_separation},
                {"seed", s.seed}};
}

inline SitePropagationModel site_from_json(const json& j) {
    SitePropagationModel s;
    s.site_id = j.at("site_id").get<int>();
    s.cluster_centers = j.at("cluster_centers").get<std::vector<double>>();
    s.cluster_angular_spread = j.at("cluster_angular_spread").get<std::vector<double>>();
    s.cluster_power_fractions = j.at("cluster_power_fractions").get<std::vector<double>>();
    s.paths_per_ue_min = j.at("paths_per_ue_range")[0].get<int>();
    s.paths_per_ue_max = j.at("paths_per_ue_range")[1].get<int>();
    s.shadowing_log_variance = j.at("shadowing_log_variance").get<double>();
    s.min_path_separation = j.at("min_path_separation").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

inline json sites_to_json(const std::vector<SitePropagationModel>& sites) {
    json arr = json::array();
    for (const auto& s : sites) arr.push_back(site_to_json(s));
    return json{{"sites", arr}};
}

inline std::vector<SitePropagationModel> sites_from_json(const json& j) {
    std::vector<SitePropagationModel> out;
    for (const auto& s : j.at("sites")) out.push_back(site_from_json(s));
    return out;
}

// ---- codebooks ---------------------------------------------------------

inline json codebook_to_json(const Codebook& cb) {
    return json{{"kind", codebook_kind_name(cb.kind)},
                {"constraint",
                 cb.constraint == BeamConstraint::phase_only ? "phase_only" : "unconstrained"},
                {"n_t", cb.n_t()},
                {"k", cb.k()},
                {"entries", matrix_to_json(cb.beams)}};
}

inline Codebook codebook_from_json(const json& j) {
    Codebook cb;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dft_full") cb.kind = CodebookKind::dft_full;
    else if (kind == "dft_sub") cb.kind = CodebookKind::dft_sub;
    else if (kind == "random") cb.kind = CodebookKind::random_beams;
    else if (kind == "learned") cb.kind = CodebookKind::learned;
    else throw std::invalid_argument("codebook_from_json: unknown kind " + kind);
    cb.constraint = j.at("constraint").get<std::string>() == "phase_only"
                        ? BeamConstraint::phase_only
                        : BeamConstraint::unconstrained;
    cb.beams = matrix_from_json(j.at("entries"), j.at("n_t").get<std::size_t>(),
                                j.at("k").get<std::size_t>());
    return cb;
}

// ---- beam-scorer model ---------------------------------------------------

inline json train_config_to_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
                {"steps", c.steps},                 {"seed", c.seed},
                {"l2sp_coefficient", c.l2sp_coefficient}, {"hidden_dims", c.hidden_dims}};
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.steps = j.at("steps").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.l2sp_coefficient = j.at("l2sp_coefficient").get<double>();
    c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    return c;
}

inline json model_to_json(const BeamScorerModel& m, const TrainConfig& cfg) {
    json weights = json::array();
    json biases = json::array();
    for (std::size_t l = 0; l < m.net.n_layers(); ++l) {
        weights.push_back(m.net.weights[l]);
        biases.push_back(m.net.biases[l]);
    }
    return json{{"layer_dims", m.net.layer_dims},
                {"weights", weights},
                {"biases", biases},
                {"center_input", m.center_input},
                {"input_shift", m.input_shift},
                {"input_scale", m.input_scale},
                {"dict_n_t", m.dict_n_t},
                {"dict_oversample", m.dict_oversample},
                {"dictionary_id", m.dictionary_id},
                {"codebook_id", m.trained_codebook_id},
                {"train_config", train_config_to_json(cfg)},
                {"seed", m.seed}};
}

inline BeamScorerModel model_from_json(const json& j, TrainConfig* cfg_out = nullptr) {
    BeamScorerModel m;
    m.net.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    for (const auto& w : j.at("weights")) m.net.weights.push_back(w.get<std::vector<double>>());
    for (const auto& b : j.at("biases")) m.net.biases.push_back(b.get<std::vector<double>>());
    m.center_input = j.at("center_input").get<bool>();
    m.input_shift = j.at("input_shift").get<double>();
    m.input_scale = j.at("input_scale").get<double>();
    m.dict_n_t = j.at("dict_n_t").get<std::size_t>();
    m.dict_oversample = j.at("dict_oversample").get<std::size_t>();
    m.dictionary_id = j.at("dictionary_id").get<std::string>();
    m.trained_codebook_id = j.at("codebook_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    if (cfg_out) *cfg_out = train_config_from_json(j.at("train_config"));
    return m;
}

// ---- calibration memory ---------------------------------------------------

inline json memory_to_json(const CalibrationMemory& mem) {
    json entries = json::array();
    for (const auto& e : mem.entries)
        entries.push_back(json{{"ue_id", e.ue_id},
                               {"key", e.key.key},
                               {"label_eigvec", cvec_to_json(e.label_vec)},
                               {"label_note", "rank-1 stored as unit eigenvector"}});
    return json{{"site_id", mem.site_id}, {"codebook_id", mem.codebook_id}, {"entries", entries}};
}

inline CalibrationMemory memory_from_json(const json& j) {
    CalibrationMemory mem;
    mem.site_id = j.at("site_id").get<int>();
    mem.codebook_id = j.at("codebook_id").get<std::string>();
    for (const auto& je : j.at("entries")) {
        CalibrationEntry e;
        e.ue_id = je.at("ue_id").get<int>();
        e.key.key = je.at("key").get<std::vector<double>>();
        e.label_vec = cvec_from_json(je.at("label_eigvec"));
        mem.entries.push_back(std::move(e));
    }
    return mem;
}

// ---- file helpers ---------------------------------------------------------

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << "\n";
}

inline json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    return json::parse(f);
}

}  // namespace csifb

// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qreservoir/serialize.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "qreservoir/errors.hpp"

namespace qrc {

namespace {

template <class T>
T get(const json &j, const char *key) {
    if (!j.contains(key)) throw SchemaError(std::string("missing key '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &e) {
        throw SchemaError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void reject_unknown(const json &j, std::initializer_list<const char *> allowed, const char *where) {
    if (!j.is_object()) throw SchemaError(std::string(where) + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto &[k, v] : j.items()) {
        if (!ok.count(k)) throw SchemaError(std::string("unknown key '") + k + "' in " + where);
    }
}

json matrix_json(const Matrix &m) { return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

Matrix matrix_from(const json &j) {
    Matrix m;
    m.rows = get<size_t>(j, "rows");
    m.cols = get<size_t>(j, "cols");
    m.data = get<std::vector<double>>(j, "data");
    if (m.data.size() != m.rows * m.cols) throw SchemaError("matrix data length does not match its shape");
    return m;
}

}  // namespace

json to_json(const reservoir::ReservoirSpec &spec) {
    json axes = json::array();
    for (auto k : spec.rotation_axes) axes.push_back(std::string(qsim::gate_name(k)));
    return json{{"family", std::string(reservoir::family_name(spec.family))},
                {"n_input_qubits", spec.n_input_qubits},
                {"n_ancilla", spec.n_ancilla},
                {"depth", spec.depth},
                {"seed", spec.seed},
                {"params", spec.params},
                {"rotation_axes", axes}};
}

reservoir::ReservoirSpec reservoir_spec_from_json(const json &j) {
    reservoir::ReservoirSpec spec;
    spec.family = reservoir::parse_family(get<std::string>(j, "family"));
    spec.n_input_qubits = get<int>(j, "n_input_qubits");
    spec.n_ancilla = get<int>(j, "n_ancilla");
    spec.depth = get<int>(j, "depth");
    spec.seed = get<uint64_t>(j, "seed");
    spec.params = get<std::vector<double>>(j, "params");
    for (const auto &name : get<std::vector<std::string>>(j, "rotation_axes")) {
        spec.rotation_axes.push_back(qsim::parse_gate_kind(name));
    }
    spec.validate();
    return spec;
}

json to_json(const data::Normalizer &norm) {
    json ranges = json::array();
    for (const auto &r : norm.ranges) ranges.push_back({r.min, r.max});
    return json{{"feature_set", std::string(data::feature_set_name(norm.feature_set))}, {"ranges", ranges}};
}

data::Normalizer normalizer_from_json(const json &j) {
    data::Normalizer norm;
    norm.feature_set = data::parse_feature_set(get<std::string>(j, "feature_set"));
    for (const auto &pair : get<std::vector<std::vector<double>>>(j, "ranges")) {
        if (pair.size() != 2) throw SchemaError("normalizer range must be [min, max]");
        norm.ranges.push_back({pair[0], pair[1]});
    }
    if (norm.ranges.size() != data::FeatureSet::of(norm.feature_set).size()) {
        throw SchemaError("normalizer has the wrong number of ranges for its feature set");
    }
    return norm;
}

json to_json(const model::TrainConfig &c) {
    return json{{"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"patience", c.patience},
                {"seed", c.seed},
                {"optimizer", c.optimizer == model::Optimizer::Adam ? "adam" : "sgd"},
                {"zero_init", c.zero_init},
                {"closed_form", c.closed_form},
                {"ridge_lambda", c.ridge_lambda}};
}

model::TrainConfig train_config_from_json(const json &j) {
    reject_unknown(j,
                   {"learning_rate", "batch_size", "max_epochs", "patience", "seed", "optimizer", "zero_init",
                    "closed_form", "ridge_lambda"},
                   "train config");
    model::TrainConfig c;
    if (j.contains("learning_rate")) c.learning_rate = get<double>(j, "learning_rate");
    if (j.contains("batch_size")) c.batch_size = get<size_t>(j, "batch_size");
    if (j.contains("max_epochs")) c.max_epochs = get<size_t>(j, "max_epochs");
    if (j.contains("patience")) c.patience = get<size_t>(j, "patience");
    if (j.contains("seed")) c.seed = get<uint64_t>(j, "seed");
    if (j.contains("optimizer")) {
        const auto name = get<std::string>(j, "optimizer");
        if (name == "adam") c.optimizer = model::Optimizer::Adam;
        else if (name == "sgd") c.optimizer = model::Optimizer::Sgd;
        else throw SchemaError("optimizer must be 'adam' or 'sgd'");
    }
    if (j.contains("zero_init")) c.zero_init = get<bool>(j, "zero_init");
    if (j.contains("closed_form")) c.closed_form = get<bool>(j, "closed_form");
    if (j.contains("ridge_lambda")) c.ridge_lambda = get<double>(j, "ridge_lambda");
    try {
        c.validate();
    } catch (const ArgumentError &e) {
        throw SchemaError(e.what());
    }
    return c;
}

json to_json(const model::HybridParams &p) {
    return json{{"w_proj", matrix_json(p.w_proj)}, {"b_proj", p.b_proj}, {"w_sw", p.w_sw},
                {"b_sw", p.b_sw},                 {"w_out", matrix_json(p.w_out)}, {"b_out", p.b_out}};
}

model::HybridParams params_from_json(const json &j) {
    model::HybridParams p;
    p.w_proj = matrix_from(get<json>(j, "w_proj"));
    p.b_proj = get<std::vector<double>>(j, "b_proj");
    p.w_sw = get<std::vector<double>>(j, "w_sw");
    p.b_sw = get<double>(j, "b_sw");
    p.w_out = matrix_from(get<json>(j, "w_out"));
    p.b_out = get<std::vector<double>>(j, "b_out");
    const model::Shapes s = p.shapes();
    if (p.b_proj.size() != s.feature_dim || p.w_sw.size() != s.input_dim || p.w_out.cols != s.feature_dim ||
        p.b_out.size() != s.output_dim) {
        throw SchemaError("inconsistent parameter shapes");
    }
    p.check_finite();
    return p;
}

Matrix ModelArtifact::predict(const Matrix &window) const {
    const auto r = reservoir::qrc_features_window(window, reservoir, engine);
    return model::predict(params, kind, window.data, r.values);
}

json to_json(const ModelArtifact &a) {
    const model::Shapes s = a.params.shapes();
    return json{{"format", "qreservoir-model"},
                {"version", 1},
                {"kind", std::string(model::kind_name(a.kind))},
                {"shapes", {{"input_dim", s.input_dim}, {"feature_dim", s.feature_dim}, {"output_dim", s.output_dim}}},
                {"params", to_json(a.params)},
                {"reservoir", to_json(a.reservoir)},
                {"feature_engine", std::string(reservoir::engine_name(a.engine))},
                {"normalizer", to_json(a.normalizer)},
                {"train", to_json(a.train)},
                {"target_space", std::string(data::target_space_name(a.target_space))},
                {"washout", a.washout},
                {"horizon", a.horizon}};
}

ModelArtifact artifact_from_json(const json &j) {
    if (get<std::string>(j, "format") != "qreservoir-model") throw SchemaError("not a model artifact");
    if (get<int>(j, "version") != 1) throw SchemaError("unsupported model artifact version");
    ModelArtifact a;
    a.kind = model::parse_kind(get<std::string>(j, "kind"));
    a.params = params_from_json(get<json>(j, "params"));
    a.reservoir = reservoir_spec_from_json(get<json>(j, "reservoir"));
    a.engine = reservoir::parse_engine(get<std::string>(j, "feature_engine"));
    a.normalizer = normalizer_from_json(get<json>(j, "normalizer"));
    a.train = train_config_from_json(get<json>(j, "train"));
    a.target_space = data::parse_target_space(get<std::string>(j, "target_space"));
    a.washout = get<size_t>(j, "washout");
    a.horizon = get<size_t>(j, "horizon");
    const json &sh = get<json>(j, "shapes");
    const model::Shapes declared{get<size_t>(sh, "input_dim"), get<size_t>(sh, "feature_dim"),
                                 get<size_t>(sh, "output_dim")};
    if (!(declared == a.params.shapes())) throw SchemaError("declared shapes do not match parameters");
    const size_t d = a.normalizer.ranges.size();
    if (declared.input_dim != a.washout * d || declared.output_dim != 2 * a.horizon ||
        declared.feature_dim != reservoir::feature_dimension(a.washout, a.reservoir.n_input_qubits, a.reservoir.n_qubits()) ||
        static_cast<size_t>(a.reservoir.n_input_qubits) != d) {
        throw SchemaError("model shapes are inconsistent with washout, horizon and reservoir");
    }
    return a;
}

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path &path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

void save_model(const ModelArtifact &artifact, const std::filesystem::path &path) {
    write_file(path, to_json(artifact).dump(2) + "\n");
}

ModelArtifact load_model(const std::filesystem::path &path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw SchemaError(std::string("invalid JSON in ") + path.string() + ": " + e.what());
    }
    return artifact_from_json(j);
}

}  // namespace qrc

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

#include "qreservoir/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "qreservoir/errors.hpp"
#include "qreservoir/rng.hpp"

namespace qrc::experiment {

namespace fs = std::filesystem;
using data::FeatureSetName;
using qrc::to_json;
using model::ModelKind;

namespace {

std::string num(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t fnv1a(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a_doubles(const std::vector<double> &values) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : values) {
        char raw[sizeof v];
        std::memcpy(raw, &v, sizeof v);
        h = fnv1a(std::string_view(raw, sizeof raw), h);
    }
    return h;
}

template <class T>
T get(const json &j, const char *key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &e) {
        throw SchemaError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void reject_unknown(const json &j, std::initializer_list<const char *> allowed, const std::string &where) {
    if (!j.is_object()) throw SchemaError(where + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto &[k, v] : j.items()) {
        if (!ok.count(k)) throw SchemaError("unknown key '" + k + "' in " + where);
    }
}

// Wraps the parse_* helpers so that bad names in a config are schema errors.
template <class F>
auto parse_name(F parse, const std::string &name, const char *what) {
    try {
        return parse(name);
    } catch (const Error &) {
        throw SchemaError(std::string("unknown ") + what + " '" + name + "'");
    }
}

std::string_view alternative_name(eval::Alternative a) {
    switch (a) {
        case eval::Alternative::TwoSided: return "two_sided";
        case eval::Alternative::Less: return "less";
        case eval::Alternative::Greater: return "greater";
    }
    return "two_sided";
}

eval::Alternative parse_alternative(const std::string &name) {
    if (name == "two_sided") return eval::Alternative::TwoSided;
    if (name == "less") return eval::Alternative::Less;
    if (name == "greater") return eval::Alternative::Greater;
    throw SchemaError("alternative must be two_sided, less or greater");
}

template <class T>
bool has_duplicates(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) != v.end();
}

// Runs fn(0..n-1) on up to `jobs` threads. fn must not throw.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)> &fn) {
    const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(jobs, 1)));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto &t : pool) t.join();
}

class SyncLog {
   public:
    explicit SyncLog(const Logger &log) : log_(log) {}
    void operator()(std::string_view msg) {
        if (!log_) return;
        std::lock_guard lock(mu_);
        log_(msg);
    }

   private:
    const Logger &log_;
    std::mutex mu_;
};

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (!data.csv && data.synthetic.n_steps < 100) throw ArgumentError("data.synthetic.n_steps must be >= 100");
    if (!data.csv && (!(data.synthetic.arena.width > 2 * data::kWaypointMargin) ||
                      !(data.synthetic.arena.height > 2 * data::kWaypointMargin))) {
        throw ArgumentError("data.synthetic.arena is too small");
    }
    if (feature_sets.empty()) throw ArgumentError("feature_sets must not be empty");
    if (has_duplicates(feature_sets)) throw ArgumentError("feature_sets has duplicates");
    if (horizons.empty()) throw ArgumentError("horizons must not be empty");
    if (has_duplicates(horizons)) throw ArgumentError("horizons has duplicates");
    for (size_t k : horizons) {
        if (k < 1) throw ArgumentError("horizons must be >= 1");
    }
    if (washout < 1) throw ArgumentError("washout must be >= 1");
    if (kinds.empty()) throw ArgumentError("kinds must not be empty");
    if (has_duplicates(kinds)) throw ArgumentError("kinds has duplicates");
    if (folds < 2) throw ArgumentError("folds must be >= 2");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ArgumentError("val_fraction must be in (0, 1)");
    if (repetitions < 1) throw ArgumentError("repetitions must be >= 1");
    train.validate();
    auto check_reservoir = [&](reservoir::Family family, FeatureSetName name) {
        const int d = static_cast<int>(data::FeatureSet::of(name).size());
        if (d + reservoir.n_ancilla > qsim::kMaxQubits) {
            throw ArgumentError("reservoir for " + std::string(data::feature_set_name(name)) + " needs more than " +
                                std::to_string(qsim::kMaxQubits) + " qubits");
        }
        try {
            (void)reservoir::ReservoirSpec::make(family, d, reservoir.n_ancilla, reservoir.depth, reservoir.seed);
        } catch (const Error &e) {
            throw ArgumentError(std::string("reservoir: ") + e.what());
        }
    };
    for (auto name : feature_sets) check_reservoir(reservoir.family, name);
    if (family_sweep) {
        if (family_sweep->families.empty()) throw ArgumentError("family_sweep.families must not be empty");
        if (has_duplicates(family_sweep->families)) throw ArgumentError("family_sweep.families has duplicates");
        if (family_sweep->horizon < 1) throw ArgumentError("family_sweep.horizon must be >= 1");
        for (auto f : family_sweep->families) check_reservoir(f, family_sweep->feature_set);
    }
    if (output_dir.empty()) throw ArgumentError("output_dir must not be empty");
}

fs::path ExperimentConfig::effective_cache_dir() const { return cache_dir.empty() ? output_dir / "cache" : cache_dir; }

ExperimentConfig config_from_json(const json &j) {
    reject_unknown(j,
                   {"data", "feature_sets", "horizons", "washout", "reservoir", "kinds", "folds", "val_fraction",
                    "repetitions", "train", "target_space", "feature_engine", "base_seed", "family_sweep",
                    "alternative", "output_dir", "cache_dir", "save_models"},
                   "config");
    ExperimentConfig c;
    if (j.contains("data")) {
        const json &d = j["data"];
        reject_unknown(d, {"csv", "synthetic"}, "data");
        if (d.contains("csv") && d.contains("synthetic")) throw SchemaError("data: give either csv or synthetic");
        if (d.contains("csv")) c.data.csv = fs::path(get<std::string>(d, "csv"));
        if (d.contains("synthetic")) {
            const json &s = d["synthetic"];
            reject_unknown(s, {"n_steps", "seed", "arena"}, "data.synthetic");
            if (s.contains("n_steps")) c.data.synthetic.n_steps = get<size_t>(s, "n_steps");
            if (s.contains("seed")) c.data.synthetic.seed = get<uint64_t>(s, "seed");
            if (s.contains("arena")) {
                const auto wh = get<std::vector<double>>(s, "arena");
                if (wh.size() != 2) throw SchemaError("data.synthetic.arena must be [width, height]");
                c.data.synthetic.arena = {wh[0], wh[1]};
            }
        }
    }
    if (j.contains("feature_sets")) {
        c.feature_sets.clear();
        for (const auto &n : get<std::vector<std::string>>(j, "feature_sets")) {
            c.feature_sets.push_back(parse_name(data::parse_feature_set, n, "feature set"));
        }
    }
    if (j.contains("horizons")) c.horizons = get<std::vector<size_t>>(j, "horizons");
    if (j.contains("washout")) c.washout = get<size_t>(j, "washout");
    if (j.contains("reservoir")) {
        const json &r = j["reservoir"];
        reject_unknown(r, {"family", "n_ancilla", "depth", "seed"}, "reservoir");
        if (r.contains("family")) c.reservoir.family = parse_name(reservoir::parse_family, get<std::string>(r, "family"), "family");
        if (r.contains("n_ancilla")) c.reservoir.n_ancilla = get<int>(r, "n_ancilla");
        if (r.contains("depth")) c.reservoir.depth = get<int>(r, "depth");
        if (r.contains("seed")) c.reservoir.seed = get<uint64_t>(r, "seed");
    }
    if (j.contains("kinds")) {
        c.kinds.clear();
        for (const auto &n : get<std::vector<std::string>>(j, "kinds")) {
            c.kinds.push_back(parse_name(model::parse_kind, n, "model kind"));
        }
    }
    if (j.contains("folds")) c.folds = get<int>(j, "folds");
    if (j.contains("val_fraction")) c.val_fraction = get<double>(j, "val_fraction");
    if (j.contains("repetitions")) c.repetitions = get<int>(j, "repetitions");
    if (j.contains("train")) c.train = train_config_from_json(j["train"]);
    if (j.contains("target_space")) {
        c.target_space = parse_name(data::parse_target_space, get<std::string>(j, "target_space"), "target space");
    }
    if (j.contains("feature_engine")) {
        c.engine = parse_name(reservoir::parse_engine, get<std::string>(j, "feature_engine"), "feature engine");
    }
    if (j.contains("base_seed")) c.base_seed = get<uint64_t>(j, "base_seed");
    if (j.contains("family_sweep") && !j["family_sweep"].is_null()) {
        const json &s = j["family_sweep"];
        reject_unknown(s, {"families", "feature_set", "horizon"}, "family_sweep");
        FamilySweep sweep;
        for (const auto &n : get<std::vector<std::string>>(s, "families")) {
            sweep.families.push_back(parse_name(reservoir::parse_family, n, "family"));
        }
        if (s.contains("feature_set")) {
            sweep.feature_set = parse_name(data::parse_feature_set, get<std::string>(s, "feature_set"), "feature set");
        }
        if (s.contains("horizon")) sweep.horizon = get<size_t>(s, "horizon");
        c.family_sweep = sweep;
    }
    if (j.contains("alternative")) c.alternative = parse_alternative(get<std::string>(j, "alternative"));
    if (j.contains("output_dir")) c.output_dir = get<std::string>(j, "output_dir");
    if (j.contains("cache_dir")) c.cache_dir = get<std::string>(j, "cache_dir");
    if (j.contains("save_models")) c.save_models = get<bool>(j, "save_models");
    return c;
}

json to_json(const ExperimentConfig &c) {
    json data_j;
    if (c.data.csv) {
        data_j["csv"] = c.data.csv->string();
    } else {
        data_j["synthetic"] = {{"n_steps", c.data.synthetic.n_steps},
                               {"seed", c.data.synthetic.seed},
                               {"arena", {c.data.synthetic.arena.width, c.data.synthetic.arena.height}}};
    }
    json fsets = json::array();
    for (auto f : c.feature_sets) fsets.push_back(std::string(data::feature_set_name(f)));
    json kinds = json::array();
    for (auto k : c.kinds) kinds.push_back(std::string(model::kind_name(k)));
    json j = {{"data", data_j},
              {"feature_sets", fsets},
              {"horizons", c.horizons},
              {"washout", c.washout},
              {"reservoir",
               {{"family", std::string(reservoir::family_name(c.reservoir.family))},
                {"n_ancilla", c.reservoir.n_ancilla},
                {"depth", c.reservoir.depth},
                {"seed", c.reservoir.seed}}},
              {"kinds", kinds},
              {"folds", c.folds},
              {"val_fraction", c.val_fraction},
              {"repetitions", c.repetitions},
              {"train", to_json(c.train)},
              {"target_space", std::string(data::target_space_name(c.target_space))},
              {"feature_engine", std::string(reservoir::engine_name(c.engine))},
              {"base_seed", c.base_seed},
              {"alternative", std::string(alternative_name(c.alternative))},
              {"output_dir", c.output_dir.string()},
              {"cache_dir", c.cache_dir.string()},
              {"save_models", c.save_models}};
    if (c.family_sweep) {
        json fams = json::array();
        for (auto f : c.family_sweep->families) fams.push_back(std::string(reservoir::family_name(f)));
        j["family_sweep"] = {{"families", fams},
                             {"feature_set", std::string(data::feature_set_name(c.family_sweep->feature_set))},
                             {"horizon", c.family_sweep->horizon}};
    }
    return j;
}

ExperimentConfig load_config(const fs::path &path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw SchemaError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

std::string config_hash(const ExperimentConfig &config) {
    json j = to_json(config);
    // where results go does not change them
    j.erase("output_dir");
    j.erase("cache_dir");
    return hex64(fnv1a(j.dump()));
}

data::Trajectory load_data(const ExperimentConfig &config) {
    if (config.data.csv) return data::load_csv(*config.data.csv);
    return data::generate_synthetic(config.data.synthetic.n_steps, config.data.synthetic.seed,
                                    config.data.synthetic.arena);
}

// ---------------------------------------------------------------- features

std::string FeatureRequest::key() const {
    const json j = {{"data_hash", hex64(data_hash)},
                    {"n_rows", n_rows},
                    {"reservoir", to_json(spec)},
                    {"normalizer", to_json(normalizer)},
                    {"washout", washout},
                    {"feature_engine", std::string(reservoir::engine_name(engine))}};
    return j.dump();
}

std::string FeatureRequest::file_name() const { return "features-" + hex64(fnv1a(key())) + ".bin"; }

Matrix compute_features(const data::Trajectory &traj, const FeatureRequest &req) {
    const auto fset = data::FeatureSet::of(req.normalizer.feature_set);
    const Matrix seq = data::normalize_rows(traj, fset, req.normalizer);
    const auto feats = reservoir::qrc_features_sequence(seq, req.spec, req.washout, reservoir::Protocol::Rewinding,
                                                        req.engine);
    const size_t dim = reservoir::feature_dimension(req.washout, req.spec.n_input_qubits, req.spec.n_qubits());
    Matrix out(feats.size(), dim);
    for (size_t i = 0; i < feats.size(); ++i) std::copy(feats[i].values.begin(), feats[i].values.end(), out.row(i).begin());
    return out;
}

namespace {

constexpr char kCacheMagic[8] = {'Q', 'R', 'C', 'F', 'E', 'A', 'T', '1'};

void put_u64(std::ostream &out, uint64_t v) { out.write(reinterpret_cast<const char *>(&v), sizeof v); }

uint64_t take_u64(std::istream &in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char *>(&v), sizeof v);
    return v;
}

// Layout: magic, key length, key, rows, cols, FNV-1a of the payload,
// rows*cols doubles. Integers and doubles in host byte order.
void write_cache(const fs::path &path, const std::string &key, const Matrix &m) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(kCacheMagic, sizeof kCacheMagic);
        put_u64(out, key.size());
        out.write(key.data(), static_cast<std::streamsize>(key.size()));
        put_u64(out, m.rows);
        put_u64(out, m.cols);
        put_u64(out, fnv1a_doubles(m.data));
        out.write(reinterpret_cast<const char *>(m.data.data()),
                  static_cast<std::streamsize>(m.data.size() * sizeof(double)));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

Matrix read_cache(const fs::path &path, const std::string &key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[sizeof kCacheMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) {
        throw IntegrityError("not a feature cache file: " + path.string());
    }
    const uint64_t key_len = take_u64(in);
    if (!in || key_len > (1u << 20)) throw IntegrityError("damaged feature cache: " + path.string());
    std::string stored(key_len, '\0');
    in.read(stored.data(), static_cast<std::streamsize>(key_len));
    if (!in || stored != key) throw IntegrityError("feature cache key collision: " + path.string());
    Matrix m;
    m.rows = take_u64(in);
    m.cols = take_u64(in);
    const uint64_t checksum = take_u64(in);
    if (!in || m.cols == 0 || m.rows > (1u << 28) / m.cols) throw IntegrityError("damaged feature cache: " + path.string());
    m.data.resize(m.rows * m.cols);
    in.read(reinterpret_cast<char *>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!in || in.peek() != std::char_traits<char>::eof() || fnv1a_doubles(m.data) != checksum) {
        throw IntegrityError("damaged feature cache: " + path.string());
    }
    return m;
}

}  // namespace

Matrix cached_features(const data::Trajectory &traj, const FeatureRequest &req, const fs::path &cache_dir,
                       const Logger &log, bool *hit) {
    const fs::path path = cache_dir / req.file_name();
    const std::string key = req.key();
    if (fs::exists(path)) {
        Matrix m = read_cache(path, key);
        if (log) log("cache hit: " + path.string());
        if (hit) *hit = true;
        return m;
    }
    Matrix m = compute_features(traj, req);
    write_cache(path, key, m);
    if (log) log("computed features: " + path.string());
    if (hit) *hit = false;
    return m;
}

// ---------------------------------------------------------------- grid

std::string CellKey::label() const {
    return std::string(model::kind_name(kind)) + "/" + std::string(data::feature_set_name(feature_set)) + "/K" +
           std::to_string(horizon) + "/fold" + std::to_string(fold) + "/rep" + std::to_string(rep);
}

uint64_t cell_seed(uint64_t base_seed, const CellKey &key) {
    return derive_seed({base_seed, static_cast<uint64_t>(key.kind), static_cast<uint64_t>(key.feature_set),
                        key.horizon, static_cast<uint64_t>(key.fold), static_cast<uint64_t>(key.rep)});
}

namespace {

constexpr uint64_t kSweepTag = 0x5357454550;  // keeps sweep seeds apart from grid seeds

uint64_t sweep_seed(uint64_t base_seed, reservoir::Family family, const FamilySweep &sweep, int fold, int rep) {
    return derive_seed({base_seed, kSweepTag, static_cast<uint64_t>(family), static_cast<uint64_t>(sweep.feature_set),
                        sweep.horizon, static_cast<uint64_t>(fold), static_cast<uint64_t>(rep)});
}

struct Split {
    model::Batch train, val, test;
};

// Everything derived from the data that cells share: per (family, fs, fold)
// normalizers and features, per (family, fs, K, fold) batches.
class Workspace {
   public:
    Workspace(const ExperimentConfig &config, const data::Trajectory &traj) : config_(config), traj_(traj) {
        data_hash_ = data::content_hash(traj);
    }

    FeatureRequest request(reservoir::Family family, FeatureSetName name, int fold) const {
        const auto fset = data::FeatureSet::of(name);
        // test segments do not depend on K, so any horizon gives the same rows
        const auto plan = fold_plan(1);
        const auto rows = data::non_test_rows(plan.folds.at(fold), traj_.size());
        std::vector<data::Row> fit_rows;
        fit_rows.reserve(rows.size());
        for (size_t r : rows) fit_rows.push_back(traj_.rows[r]);
        FeatureRequest req;
        req.data_hash = data_hash_;
        req.n_rows = traj_.size();
        req.spec = reservoir::ReservoirSpec::make(family, static_cast<int>(fset.size()), config_.reservoir.n_ancilla,
                                                  config_.reservoir.depth, config_.reservoir.seed);
        req.normalizer = data::fit_normalizer(fit_rows, fset);
        req.washout = config_.washout;
        req.engine = config_.engine;
        return req;
    }

    data::FoldPlan fold_plan(size_t horizon) const {
        const auto spans = data::window_spans(traj_.size(), config_.washout, horizon);
        return data::make_folds(spans, traj_.size(), config_.folds, config_.val_fraction);
    }

    void add_features(reservoir::Family family, FeatureSetName name, int fold, FeatureRequest req, Matrix feats) {
        feats_[{family, name, fold}] = {std::move(req), std::move(feats)};
    }

    const std::pair<FeatureRequest, Matrix> &features(reservoir::Family family, FeatureSetName name, int fold) const {
        return feats_.at({family, name, fold});
    }

    Split build_split(reservoir::Family family, FeatureSetName name, size_t horizon, int fold) const {
        const auto &[req, feats] = features(family, name, fold);
        const auto fset = data::FeatureSet::of(name);
        const auto windows =
            data::make_windows(traj_, fset, config_.washout, horizon, req.normalizer, config_.target_space);
        const auto plan = fold_plan(horizon);
        const auto &f = plan.folds.at(fold);
        const size_t first_t = config_.washout - 1;
        auto batch = [&](const std::vector<size_t> &ts) {
            model::Batch b;
            if (ts.empty()) return b;
            const auto &w0 = windows.at(ts[0] - first_t);
            b.inputs = Matrix(ts.size(), w0.features.size());
            b.features = Matrix(ts.size(), feats.cols);
            b.targets = Matrix(ts.size(), w0.target.size());
            for (size_t i = 0; i < ts.size(); ++i) {
                const auto &w = windows.at(ts[i] - first_t);
                std::copy(w.features.data.begin(), w.features.data.end(), b.inputs.row(i).begin());
                const auto r = feats.row(ts[i] - first_t);
                std::copy(r.begin(), r.end(), b.features.row(i).begin());
                std::copy(w.target.data.begin(), w.target.data.end(), b.targets.row(i).begin());
            }
            return b;
        };
        return {batch(f.train), batch(f.val), batch(f.test)};
    }

    const ExperimentConfig &config() const { return config_; }
    uint64_t data_hash() const { return data_hash_; }

   private:
    const ExperimentConfig &config_;
    const data::Trajectory &traj_;
    uint64_t data_hash_ = 0;
    std::map<std::tuple<reservoir::Family, FeatureSetName, int>, std::pair<FeatureRequest, Matrix>> feats_;
};

struct FeatureJob {
    reservoir::Family family;
    FeatureSetName name;
    int fold;
};

std::vector<FeatureJob> feature_jobs(const ExperimentConfig &config) {
    std::vector<FeatureJob> jobs;
    std::set<std::tuple<reservoir::Family, FeatureSetName, int>> seen;
    auto add = [&](reservoir::Family fam, FeatureSetName name) {
        for (int fold = 0; fold < config.folds; ++fold) {
            if (seen.insert({fam, name, fold}).second) jobs.push_back({fam, name, fold});
        }
    };
    for (auto name : config.feature_sets) add(config.reservoir.family, name);
    if (config.family_sweep) {
        for (auto fam : config.family_sweep->families) add(fam, config.family_sweep->feature_set);
    }
    return jobs;
}

void check_folds(const Workspace &ws, const ExperimentConfig &config) {
    std::set<size_t> horizons(config.horizons.begin(), config.horizons.end());
    if (config.family_sweep) horizons.insert(config.family_sweep->horizon);
    for (size_t k : horizons) {
        const auto plan = ws.fold_plan(k);
        for (const auto &f : plan.folds) {
            if (f.train.empty() || f.val.empty() || f.test.empty()) {
                throw ArgumentError("fold " + std::to_string(f.fold_id) + " at K=" + std::to_string(k) +
                                    " has an empty train, validation or test set; the trajectory is too short");
            }
        }
    }
}

// Fills the workspace with features, computing missing ones in parallel.
size_t prepare_features(Workspace &ws, const data::Trajectory &traj, const RunOptions &options) {
    const ExperimentConfig &config = ws.config();
    const auto jobs = feature_jobs(config);
    std::vector<FeatureRequest> reqs;
    for (const auto &j : jobs) reqs.push_back(ws.request(j.family, j.name, j.fold));
    std::vector<Matrix> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::vector<char> hits(jobs.size(), 0);
    SyncLog log(options.log);
    const Logger sync_log = [&log](std::string_view m) { log(m); };
    const fs::path cache = config.effective_cache_dir();
    parallel_for(jobs.size(), options.jobs, [&](size_t i) {
        try {
            bool hit = false;
            results[i] = cached_features(traj, reqs[i], cache, sync_log, &hit);
            hits[i] = hit;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (auto &e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (size_t i = 0; i < jobs.size(); ++i) {
        ws.add_features(jobs[i].family, jobs[i].name, jobs[i].fold, std::move(reqs[i]), std::move(results[i]));
    }
    return static_cast<size_t>(std::count(hits.begin(), hits.end(), 1));
}

struct CellOutcome {
    double l_mse = 0.0;
    model::TrainResult result;
};

CellOutcome run_cell(const Split &split, ModelKind kind, model::TrainConfig tc) {
    tc.closed_form = tc.closed_form && kind == ModelKind::QrcOnly;
    CellOutcome out;
    out.result = model::train(split.train, split.val, kind, tc);
    const Matrix pred = model::predict_batch(out.result.params, kind, split.test);
    const size_t k = split.test.targets.cols / 2;
    std::vector<Matrix> preds, targets;
    for (size_t i = 0; i < split.test.size(); ++i) {
        Matrix p(k, 2), t(k, 2);
        std::copy_n(pred.row(i).begin(), 2 * k, p.data.begin());
        std::copy_n(split.test.targets.row(i).begin(), 2 * k, t.data.begin());
        preds.push_back(std::move(p));
        targets.push_back(std::move(t));
    }
    out.l_mse = eval::l_mse(preds, targets);
    return out;
}

std::string join(const std::vector<std::string> &parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

double mean_of(const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string k_label(size_t k) { return "K" + std::to_string(k); }

void add_statistics(RunReport &report, const ExperimentConfig &config) {
    // family sweep: Kruskal-Wallis over the families
    if (config.family_sweep) {
        std::vector<std::vector<double>> groups;
        std::vector<std::string> names;
        for (auto fam : config.family_sweep->families) {
            std::vector<double> g;
            for (const auto &r : report.sweep_records) {
                if (r.family == fam) g.push_back(r.l_mse);
            }
            if (g.empty()) continue;
            groups.push_back(std::move(g));
            names.emplace_back(reservoir::family_name(fam));
        }
        if (groups.size() >= 2) {
            const auto t = eval::kruskal_wallis(groups);
            report.stats.push_back({"kruskal_wallis", "families:" + join(names, "|"), t.statistic, t.p_value, {}, false});
        } else {
            report.notes.push_back("family comparison skipped: fewer than two families have results");
        }
    }

    std::map<CellKey, double> value;
    for (const auto &r : report.records) value[r.key] = r.l_mse;
    auto values_of = [&](ModelKind kind, FeatureSetName name, size_t k) {
        std::vector<double> v;
        for (int fold = 0; fold < config.folds; ++fold) {
            for (int rep = 0; rep < config.repetitions; ++rep) {
                auto it = value.find({kind, name, k, fold, rep});
                if (it != value.end()) v.push_back(it->second);
            }
        }
        return v;
    };

    // QuReBot against Skip-only per configuration
    const bool both = std::count(config.kinds.begin(), config.kinds.end(), ModelKind::QuReBot) &&
                      std::count(config.kinds.begin(), config.kinds.end(), ModelKind::SkipOnly);
    if (both) {
        for (auto name : config.feature_sets) {
            for (size_t k : config.horizons) {
                const auto x = values_of(ModelKind::QuReBot, name, k);
                const auto y = values_of(ModelKind::SkipOnly, name, k);
                const std::string where = std::string(data::feature_set_name(name)) + "/" + k_label(k);
                if (x.empty() || y.empty()) {
                    report.notes.push_back("qurebot vs skip_only skipped for " + where + ": no results");
                    continue;
                }
                const auto t = eval::mann_whitney_u(x, y, config.alternative);
                const double a = eval::a12(x, y);
                KindComparison row{name, k, mean_of(x), mean_of(y), 0.0, t.p_value, a, {}};
                row.delta_pct = (row.skip_mean - row.qurebot_mean) / row.skip_mean * 100.0;
                if (t.p_value >= eval::kSignificance) row.verdict = "no_significant_difference";
                else if (a < 0.5) row.verdict = "qurebot_better";
                else if (a > 0.5) row.verdict = "skip_only_better";
                else row.verdict = "no_significant_difference";
                report.comparisons.push_back(row);
                report.stats.push_back({"mann_whitney_u", where + ":qurebot|skip_only", t.statistic, t.p_value, a, true});
            }
        }
    }

    // QuReBot across feature sets and across horizons: Friedman, then pairwise Wilcoxon
    if (!std::count(config.kinds.begin(), config.kinds.end(), ModelKind::QuReBot)) return;
    struct Grouping {
        std::string name;
        std::vector<std::string> labels;
        std::vector<std::vector<double>> columns;  // matched blocks
    };
    std::vector<Grouping> groupings;
    if (config.feature_sets.size() >= 2) {
        Grouping g{"feature_sets", {}, std::vector<std::vector<double>>(config.feature_sets.size())};
        for (auto name : config.feature_sets) g.labels.emplace_back(data::feature_set_name(name));
        for (size_t k : config.horizons) {
            for (int fold = 0; fold < config.folds; ++fold) {
                for (int rep = 0; rep < config.repetitions; ++rep) {
                    std::vector<double> block;
                    for (auto name : config.feature_sets) {
                        auto it = value.find({ModelKind::QuReBot, name, k, fold, rep});
                        if (it != value.end()) block.push_back(it->second);
                    }
                    if (block.size() != config.feature_sets.size()) continue;
                    for (size_t i = 0; i < block.size(); ++i) g.columns[i].push_back(block[i]);
                }
            }
        }
        groupings.push_back(std::move(g));
    }
    if (config.horizons.size() >= 2) {
        Grouping g{"horizons", {}, std::vector<std::vector<double>>(config.horizons.size())};
        for (size_t k : config.horizons) g.labels.push_back(k_label(k));
        for (auto name : config.feature_sets) {
            for (int fold = 0; fold < config.folds; ++fold) {
                for (int rep = 0; rep < config.repetitions; ++rep) {
                    std::vector<double> block;
                    for (size_t k : config.horizons) {
                        auto it = value.find({ModelKind::QuReBot, name, k, fold, rep});
                        if (it != value.end()) block.push_back(it->second);
                    }
                    if (block.size() != config.horizons.size()) continue;
                    for (size_t i = 0; i < block.size(); ++i) g.columns[i].push_back(block[i]);
                }
            }
        }
        groupings.push_back(std::move(g));
    }
    for (const auto &g : groupings) {
        const size_t n_blocks = g.columns[0].size();
        if (n_blocks < 2) {
            report.notes.push_back("friedman over " + g.name + " skipped: fewer than two complete blocks");
            continue;
        }
        Matrix blocks(n_blocks, g.columns.size());
        for (size_t b = 0; b < n_blocks; ++b) {
            for (size_t c = 0; c < g.columns.size(); ++c) blocks(b, c) = g.columns[c][b];
        }
        const auto f = eval::friedman(blocks);
        report.stats.push_back({"friedman", g.name + ":" + join(g.labels, "|"), f.statistic, f.p_value, {}, false});
        for (size_t i = 0; i < g.columns.size(); ++i) {
            for (size_t j = i + 1; j < g.columns.size(); ++j) {
                const std::string pair = g.name + ":" + g.labels[i] + "|" + g.labels[j];
                try {
                    const auto w = eval::wilcoxon_signed_rank(g.columns[i], g.columns[j], config.alternative);
                    report.stats.push_back(
                        {"wilcoxon_signed_rank", pair, w.statistic, w.p_value, eval::a12(g.columns[i], g.columns[j]), true});
                } catch (const DegenerateInputError &e) {
                    report.notes.push_back("wilcoxon " + pair + " skipped: " + e.what());
                }
            }
        }
    }
}

}  // namespace

size_t cmd_features(const ExperimentConfig &config, const RunOptions &options) {
    config.validate();
    const auto traj = load_data(config);
    Workspace ws(config, traj);
    check_folds(ws, config);
    return prepare_features(ws, traj, options);
}

RunReport cmd_run(const ExperimentConfig &config, const RunOptions &options) {
    config.validate();
    const auto traj = load_data(config);
    Workspace ws(config, traj);
    check_folds(ws, config);
    prepare_features(ws, traj, options);
    SyncLog log(options.log);

    RunReport report;
    report.provenance = {{"tool", "qreservoir"},
                         {"tool_version", std::string(kToolVersion)},
                         {"config_hash", config_hash(config)},
                         {"config", to_json(config)},
                         {"data",
                          {{"source", config.data.csv ? config.data.csv->string() : std::string("synthetic")},
                           {"content_hash", hex64(ws.data_hash())},
                           {"n_rows", traj.size()}}},
                         {"base_seed", config.base_seed}};
    json dropped = json::object();
    for (size_t k : config.horizons) dropped[k_label(k)] = ws.fold_plan(k).dropped;
    report.provenance["dropped_windows"] = dropped;

    // grid cells in report order; shared splits per (fs, K, fold)
    std::vector<CellKey> cells;
    for (auto kind : config.kinds) {
        for (auto name : config.feature_sets) {
            for (size_t k : config.horizons) {
                for (int fold = 0; fold < config.folds; ++fold) {
                    for (int rep = 0; rep < config.repetitions; ++rep) cells.push_back({kind, name, k, fold, rep});
                }
            }
        }
    }
    std::map<std::tuple<FeatureSetName, size_t, int>, Split> splits;
    for (auto name : config.feature_sets) {
        for (size_t k : config.horizons) {
            for (int fold = 0; fold < config.folds; ++fold) {
                splits[{name, k, fold}] = ws.build_split(config.reservoir.family, name, k, fold);
            }
        }
    }

    struct Slot {
        std::optional<MetricRecord> record;
        std::optional<CellFailure> failure;
    };
    std::vector<Slot> slots(cells.size());
    std::atomic<size_t> done{0};
    parallel_for(cells.size(), options.jobs, [&](size_t i) {
        const CellKey &key = cells[i];
        try {
            model::TrainConfig tc = config.train;
            tc.seed = cell_seed(config.base_seed, key);
            const auto out = run_cell(splits.at({key.feature_set, key.horizon, key.fold}), key.kind, tc);
            slots[i].record = MetricRecord{key,
                                           tc.seed,
                                           out.l_mse,
                                           out.result.history.size(),
                                           out.result.best_epoch,
                                           out.result.early_stopped};
            if (config.save_models) {
                const auto &req = ws.features(config.reservoir.family, key.feature_set, key.fold).first;
                ModelArtifact art{key.kind,   out.result.params,   req.spec,      config.engine, req.normalizer,
                                  tc,         config.target_space, config.washout, key.horizon};
                std::string file = key.label();
                std::replace(file.begin(), file.end(), '/', '_');
                save_model(art, config.output_dir / "models" / (file + ".json"));
            }
        } catch (const std::exception &e) {
            slots[i].failure = CellFailure{key.label(), e.what()};
        }
        const size_t n = ++done;
        log("[" + std::to_string(n) + "/" + std::to_string(cells.size()) + "] " + key.label() +
            (slots[i].record ? " l_mse=" + num(slots[i].record->l_mse) : " FAILED: " + slots[i].failure->message));
    });
    for (auto &s : slots) {
        if (s.record) report.records.push_back(*s.record);
        if (s.failure) report.failures.push_back(*s.failure);
    }

    if (config.family_sweep) {
        const auto &sweep = *config.family_sweep;
        struct SweepCell {
            reservoir::Family family;
            int fold, rep;
        };
        std::vector<SweepCell> sc;
        std::map<std::pair<reservoir::Family, int>, Split> sweep_splits;
        for (auto fam : sweep.families) {
            for (int fold = 0; fold < config.folds; ++fold) {
                sweep_splits[{fam, fold}] = ws.build_split(fam, sweep.feature_set, sweep.horizon, fold);
                for (int rep = 0; rep < config.repetitions; ++rep) sc.push_back({fam, fold, rep});
            }
        }
        std::vector<std::optional<SweepRecord>> out(sc.size());
        std::vector<std::optional<CellFailure>> fail(sc.size());
        parallel_for(sc.size(), options.jobs, [&](size_t i) {
            const auto &c = sc[i];
            const std::string label = "sweep/" + std::string(reservoir::family_name(c.family)) + "/fold" +
                                      std::to_string(c.fold) + "/rep" + std::to_string(c.rep);
            try {
                model::TrainConfig tc = config.train;
                tc.seed = sweep_seed(config.base_seed, c.family, sweep, c.fold, c.rep);
                const auto o = run_cell(sweep_splits.at({c.family, c.fold}), ModelKind::QrcOnly, tc);
                out[i] = SweepRecord{c.family, c.fold, c.rep, tc.seed, o.l_mse, o.result.history.size(),
                                     o.result.early_stopped};
                log(label + " l_mse=" + num(o.l_mse));
            } catch (const std::exception &e) {
                fail[i] = CellFailure{label, e.what()};
                log(label + " FAILED: " + e.what());
            }
        });
        for (size_t i = 0; i < sc.size(); ++i) {
            if (out[i]) report.sweep_records.push_back(*out[i]);
            if (fail[i]) report.failures.push_back(*fail[i]);
        }
    }

    add_statistics(report, config);
    write_outputs(report, config.output_dir);
    return report;
}

size_t cmd_gen(uint64_t seed, size_t n_steps, const fs::path &out, data::Arena arena) {
    if (n_steps < 100) throw ArgumentError("n_steps must be >= 100");
    const auto traj = data::generate_synthetic(n_steps, seed, arena);
    write_file(out, data::to_csv(traj));
    return traj.size();
}

// ---------------------------------------------------------------- outputs

json to_json(const RunReport &report) {
    json records = json::array();
    for (const auto &r : report.records) {
        records.push_back({{"kind", std::string(model::kind_name(r.key.kind))},
                           {"feature_set", std::string(data::feature_set_name(r.key.feature_set))},
                           {"horizon", r.key.horizon},
                           {"fold", r.key.fold},
                           {"rep", r.key.rep},
                           {"seed", r.seed},
                           {"l_mse", r.l_mse},
                           {"epochs", r.epochs},
                           {"best_epoch", r.best_epoch},
                           {"early_stopped", r.early_stopped}});
    }
    json sweep = json::array();
    for (const auto &r : report.sweep_records) {
        sweep.push_back({{"family", std::string(reservoir::family_name(r.family))},
                         {"fold", r.fold},
                         {"rep", r.rep},
                         {"seed", r.seed},
                         {"l_mse", r.l_mse},
                         {"epochs", r.epochs},
                         {"early_stopped", r.early_stopped}});
    }
    json failures = json::array();
    for (const auto &f : report.failures) failures.push_back({{"cell", f.cell}, {"error", f.message}});
    json stats = json::array();
    for (const auto &s : report.stats) {
        stats.push_back({{"test", s.test},
                         {"groups", s.groups},
                         {"statistic", s.statistic},
                         {"p", s.p_value},
                         {"significant", s.p_value < eval::kSignificance},
                         {"a12", s.a12 ? json(*s.a12) : json(nullptr)}});
    }
    json comparisons = json::array();
    for (const auto &r : report.comparisons) {
        comparisons.push_back({{"feature_set", std::string(data::feature_set_name(r.feature_set))},
                       {"horizon", r.horizon},
                       {"qurebot_mean", r.qurebot_mean},
                       {"skip_only_mean", r.skip_mean},
                       {"delta_pct", r.delta_pct},
                       {"p", r.p_value},
                       {"a12", r.a12},
                       {"verdict", r.verdict}});
    }
    return {{"provenance", report.provenance},
            {"records", records},
            {"family_sweep_records", sweep},
            {"failures", failures},
            {"stats", stats},
            {"qurebot_vs_skip_only", comparisons},
            {"notes", report.notes}};
}

std::string metrics_csv(const RunReport &report) {
    std::string out = "kind,fs,K,fold,rep,l_mse\n";
    for (const auto &r : report.records) {
        out += std::string(model::kind_name(r.key.kind)) + "," + std::string(data::feature_set_name(r.key.feature_set)) +
               "," + std::to_string(r.key.horizon) + "," + std::to_string(r.key.fold) + "," +
               std::to_string(r.key.rep) + "," + num(r.l_mse) + "\n";
    }
    return out;
}

std::string stats_csv(const RunReport &report) {
    std::string out = "test,groups,statistic,p,a12\n";
    for (const auto &s : report.stats) {
        std::string a;
        if (s.pairwise && s.p_value >= eval::kSignificance) a = "---";
        else if (s.a12) a = num(*s.a12);
        out += s.test + "," + s.groups + "," + num(s.statistic) + "," + num(s.p_value) + "," + a + "\n";
    }
    return out;
}

std::string box_csv(const RunReport &report) {
    std::map<std::tuple<ModelKind, FeatureSetName, size_t>, std::vector<double>> groups;
    std::vector<std::tuple<ModelKind, FeatureSetName, size_t>> order;
    for (const auto &r : report.records) {
        const auto key = std::make_tuple(r.key.kind, r.key.feature_set, r.key.horizon);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(r.l_mse);
    }
    std::string out = "kind,fs,K,n,min,q1,median,q3,max,mean\n";
    for (const auto &key : order) {
        const auto b = eval::box_stats(groups[key]);
        out += std::string(model::kind_name(std::get<0>(key))) + "," +
               std::string(data::feature_set_name(std::get<1>(key))) + "," + std::to_string(std::get<2>(key)) + "," +
               std::to_string(b.n) + "," + num(b.min) + "," + num(b.q1) + "," + num(b.median) + "," + num(b.q3) +
               "," + num(b.max) + "," + num(b.mean) + "\n";
    }
    return out;
}

std::string comparison_csv(const RunReport &report) {
    std::string out = "fs,K,qurebot_mean,skip_only_mean,delta_pct,p,a12,verdict\n";
    for (const auto &r : report.comparisons) {
        const std::string a = r.p_value >= eval::kSignificance ? "---" : num(r.a12);
        out += std::string(data::feature_set_name(r.feature_set)) + "," + std::to_string(r.horizon) + "," +
               num(r.qurebot_mean) + "," + num(r.skip_mean) + "," + num(r.delta_pct) + "," + num(r.p_value) + "," +
               a + "," + r.verdict + "\n";
    }
    return out;
}

std::string sweep_csv(const RunReport &report) {
    std::string out = "family,fold,rep,l_mse\n";
    for (const auto &r : report.sweep_records) {
        out += std::string(reservoir::family_name(r.family)) + "," + std::to_string(r.fold) + "," +
               std::to_string(r.rep) + "," + num(r.l_mse) + "\n";
    }
    return out;
}

void write_outputs(const RunReport &report, const fs::path &dir) {
    write_file(dir / "report.json", to_json(report).dump(2) + "\n");
    write_file(dir / "metrics.csv", metrics_csv(report));
    write_file(dir / "stats.csv", stats_csv(report));
    write_file(dir / "box.csv", box_csv(report));
    if (!report.comparisons.empty()) write_file(dir / "hybrid_vs_skip.csv", comparison_csv(report));
    if (!report.sweep_records.empty()) write_file(dir / "family_sweep.csv", sweep_csv(report));
}

// ---------------------------------------------------------------- compare

std::string Comparison::to_csv() const {
    std::string out = "cell";
    for (const auto &l : labels) out += ",l_mse_" + l;
    for (size_t i = 1; i < labels.size(); ++i) out += ",delta_" + labels[i];
    out += ",better\n";
    for (const auto &r : rows) {
        out += r.cell;
        for (double v : r.l_mse) out += "," + num(v);
        for (size_t i = 1; i < r.delta.size(); ++i) out += "," + num(r.delta[i]);
        out += "," + r.better + "\n";
    }
    return out;
}

Comparison cmd_compare(const std::vector<fs::path> &report_paths) {
    if (report_paths.size() < 2) throw ArgumentError("compare needs at least two reports");
    Comparison cmp;
    std::vector<std::map<std::string, double>> tables;
    for (size_t i = 0; i < report_paths.size(); ++i) {
        cmp.labels.push_back(i < 26 ? std::string(1, static_cast<char>('A' + i)) : "R" + std::to_string(i));
        json j;
        try {
            j = json::parse(read_file(report_paths[i]));
        } catch (const json::parse_error &e) {
            throw SchemaError("invalid JSON in " + report_paths[i].string() + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("records") || !j["records"].is_array()) {
            throw SchemaError(report_paths[i].string() + " is not a run report");
        }
        std::map<std::string, double> table;
        for (const auto &r : j["records"]) {
            CellKey key{parse_name(model::parse_kind, get<std::string>(r, "kind"), "model kind"),
                        parse_name(data::parse_feature_set, get<std::string>(r, "feature_set"), "feature set"),
                        get<size_t>(r, "horizon"), get<int>(r, "fold"), get<int>(r, "rep")};
            if (!table.emplace(key.label(), get<double>(r, "l_mse")).second) {
                throw SchemaError(report_paths[i].string() + " has a duplicate cell " + key.label());
            }
        }
        tables.push_back(std::move(table));
    }
    for (size_t i = 1; i < tables.size(); ++i) {
        bool same = tables[i].size() == tables[0].size();
        for (auto a = tables[0].begin(), b = tables[i].begin(); same && a != tables[0].end(); ++a, ++b) {
            same = a->first == b->first;
        }
        if (!same) {
            throw SchemaError("reports " + report_paths[0].string() + " and " + report_paths[i].string() +
                              " cover different grids");
        }
    }
    for (const auto &[cell, base] : tables[0]) {
        CompareRow row{cell, {}, {}, {}};
        for (const auto &t : tables) {
            const double v = t.at(cell);
            row.l_mse.push_back(v);
            row.delta.push_back(v - base);
        }
        const double best = *std::min_element(row.l_mse.begin(), row.l_mse.end());
        const auto n_best = std::count(row.l_mse.begin(), row.l_mse.end(), best);
        row.better = n_best > 1 ? "tie"
                                : cmp.labels[static_cast<size_t>(
                                      std::find(row.l_mse.begin(), row.l_mse.end(), best) - row.l_mse.begin())];
        cmp.rows.push_back(std::move(row));
    }
    return cmp;
}

}  // namespace qrc::experiment

#include "dafh/bundle.hpp"

#include <fstream>

#include <json.hpp>

#include "dafh/kernels.hpp"

namespace dafh {

using json = nlohmann::ordered_json;

namespace {

json to_json(const Matrix& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) throw data_error("corrupt model file: matrix shape");
    return m;
}

json to_json(const LogisticModel& m) {
    return json{{"weights", m.weights}, {"bias", m.bias}};
}

LogisticModel logistic_from_json(const json& j) {
    LogisticModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    return m;
}

json to_json(const Schema& s) {
    json cols = json::array();
    for (const auto& c : s.columns) {
        cols.push_back(json{{"source", c.source},
                            {"category", c.category},
                            {"kind", c.kind == ColumnKind::numeric ? "numeric" : "categorical"},
                            {"mean", c.mean},
                            {"stdev", c.stdev}});
    }
    return json{{"label", s.label_name},
                {"sensitive", s.sensitive_names},
                {"standardized", s.standardized},
                {"columns", cols},
                {"fingerprint", hex64(s.fingerprint())}};
}

Schema schema_from_json(const json& j) {
    Schema s;
    s.label_name = j.at("label").get<std::string>();
    s.sensitive_names = j.at("sensitive").get<std::vector<std::string>>();
    s.standardized = j.at("standardized").get<bool>();
    for (const auto& c : j.at("columns")) {
        FeatureColumn col;
        col.source = c.at("source").get<std::string>();
        col.category = c.at("category").get<std::string>();
        col.kind = c.at("kind").get<std::string>() == "numeric" ? ColumnKind::numeric
                                                                : ColumnKind::categorical;
        col.mean = c.at("mean").get<double>();
        col.stdev = c.at("stdev").get<double>();
        s.columns.push_back(std::move(col));
    }
    if (j.at("fingerprint").get<std::string>() != hex64(s.fingerprint())) {
        throw data_error("corrupt model file: schema fingerprint does not match contents");
    }
    return s;
}

json to_json(const TrainConfig& c) {
    return json{{"k", c.k},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"lr_group", c.lr_group},
                {"lr_decoupled", c.lr_decoupled},
                {"momentum_decoupled", c.momentum_decoupled},
                {"lambda", c.lambda},
                {"seed", c.seed},
                {"tau", c.tau},
                {"convergence_tol", c.convergence_tol}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.k = j.at("k").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.lr_group = j.at("lr_group").get<double>();
    c.lr_decoupled = j.at("lr_decoupled").get<double>();
    c.momentum_decoupled = j.at("momentum_decoupled").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.tau = j.at("tau").get<double>();
    c.convergence_tol = j.at("convergence_tol").get<double>();
    return c;
}

json to_json(const Partition& p) {
    json out{{"source", to_string(p.source)}, {"k", p.k}};
    if (const auto* attr = std::get_if<AttributeRule>(&p.rule)) {
        out["rule"] = "attribute";
        out["attribute"] = attr->attribute;
        if (attr->threshold) out["threshold"] = *attr->threshold;
        json map = json::object();
        for (const auto& [v, g] : attr->value_to_group) map[v] = g;
        out["value_to_group"] = map;
    } else if (const auto* km = std::get_if<KMeansRule>(&p.rule)) {
        out["rule"] = "kmeans";
        out["centroids"] = to_json(km->centroids);
    } else if (const auto* inter = std::get_if<IntersectionRule>(&p.rule)) {
        out["rule"] = "intersection";
        out["attributes"] = inter->attributes;
        json map = json::object();
        for (const auto& [v, g] : inter->combo_to_group) map[v] = g;
        out["combo_to_group"] = map;
        out["fallback_group"] = inter->fallback_group;
    } else if (const auto* manual = std::get_if<ManualRule>(&p.rule)) {
        out["rule"] = "manual";
        out["race_column"] = manual->race_column;
        out["sex_column"] = manual->sex_column;
        out["age_column"] = manual->age_column;
        out["white_value"] = manual->white_value;
        out["male_value"] = manual->male_value;
        out["female_value"] = manual->female_value;
        out["coin_seed"] = manual->coin_seed;
    } else {
        out["rule"] = "single";
    }
    return out;
}

Partition partition_from_json(const json& j) {
    Partition p;
    p.source = partition_source_from_string(j.at("source").get<std::string>());
    p.k = j.at("k").get<std::size_t>();
    const std::string rule = j.at("rule").get<std::string>();
    if (rule == "attribute") {
        AttributeRule r;
        r.attribute = j.at("attribute").get<std::string>();
        if (j.contains("threshold")) r.threshold = j.at("threshold").get<double>();
        for (const auto& [v, g] : j.at("value_to_group").items()) {
            r.value_to_group[v] = g.get<std::size_t>();
        }
        p.rule = std::move(r);
    } else if (rule == "kmeans") {
        p.rule = KMeansRule{matrix_from_json(j.at("centroids"))};
    } else if (rule == "intersection") {
        IntersectionRule r;
        r.attributes = j.at("attributes").get<std::vector<std::string>>();
        for (const auto& [v, g] : j.at("combo_to_group").items()) {
            r.combo_to_group[v] = g.get<std::size_t>();
        }
        r.fallback_group = j.at("fallback_group").get<std::size_t>();
        p.rule = std::move(r);
    } else if (rule == "manual") {
        ManualRule r;
        r.race_column = j.at("race_column").get<std::string>();
        r.sex_column = j.at("sex_column").get<std::string>();
        r.age_column = j.at("age_column").get<std::string>();
        r.white_value = j.at("white_value").get<std::string>();
        r.male_value = j.at("male_value").get<std::string>();
        r.female_value = j.at("female_value").get<std::string>();
        r.coin_seed = j.at("coin_seed").get<std::uint64_t>();
        p.rule = std::move(r);
    } else if (rule == "single") {
        p.rule = SingleGroupRule{};
    } else {
        throw data_error("corrupt model file: unknown partition rule " + rule);
    }
    return p;
}

}  // namespace

void ModelBundle::check_compatible(const Dataset& data) const {
    if (schema.fingerprint() != data.schema.fingerprint()) {
        throw data_error("schema fingerprint mismatch between model and dataset");
    }
    if (data.dim() != dim()) {
        throw data_error("feature dimension mismatch between model and dataset");
    }
}

std::vector<std::size_t> ModelBundle::assign_all(const Dataset& data) const {
    std::vector<std::size_t> out(data.size(), 0);
    if (group_net) {
        const auto acts = kern::group_forward_batch(*group_net, data.features);
        for (std::size_t i = 0; i < data.size(); ++i) {
            out[i] = hard_assign(std::span<const double>(acts.probs.row(i), k()));
        }
    } else if (partition) {
        for (std::size_t i = 0; i < data.size(); ++i) out[i] = partition->assign(data, i);
    }
    return out;
}

ModelBundle bundle_from_system(const TrainedSystem& system, Schema schema, std::string method) {
    ModelBundle b;
    b.method = std::move(method);
    b.schema = std::move(schema);
    b.pooled = system.pooled;
    b.decoupled = system.decoupled;
    b.group_net = system.group;
    b.config = system.config;
    return b;
}

ModelBundle bundle_from_partitioned(const PartitionedSystem& system, Schema schema,
                                    std::string method, TrainConfig config) {
    ModelBundle b;
    b.method = std::move(method);
    b.schema = std::move(schema);
    b.pooled = system.pooled;
    b.decoupled = system.decoupled;
    b.partition = system.partition;
    b.partition->assignment.clear();  // rules reproduce assignments; keep bundles small
    b.config = config;
    return b;
}

ModelBundle bundle_from_pooled(const LogisticModel& pooled, Schema schema, TrainConfig config) {
    ModelBundle b;
    b.method = "pooled";
    b.schema = std::move(schema);
    b.pooled = pooled;
    b.decoupled = {pooled};
    Partition part;
    part.k = 1;
    part.source = PartitionSource::single;
    part.rule = SingleGroupRule{};
    b.partition = std::move(part);
    b.config = config;
    return b;
}

TrainedSystem system_from_bundle(const ModelBundle& bundle) {
    if (!bundle.group_net) {
        throw data_error("model bundle has no learned group classifier");
    }
    TrainedSystem sys;
    sys.group = *bundle.group_net;
    sys.decoupled = bundle.decoupled;
    sys.pooled = bundle.pooled;
    sys.config = bundle.config;
    return sys;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    json j;
    j["format"] = "dafh-model-bundle";
    j["version"] = bundle_format_version;
    j["method"] = bundle.method;
    j["schema"] = to_json(bundle.schema);
    j["config"] = to_json(bundle.config);
    j["pooled"] = to_json(bundle.pooled);
    json dec = json::array();
    for (const auto& m : bundle.decoupled) dec.push_back(to_json(m));
    j["decoupled"] = dec;
    if (bundle.group_net) {
        j["group_net"] = json{{"w1", to_json(bundle.group_net->w1)},
                              {"b1", bundle.group_net->b1},
                              {"w2", to_json(bundle.group_net->w2)},
                              {"b2", bundle.group_net->b2}};
    }
    if (bundle.partition) j["partition"] = to_json(*bundle.partition);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw data_error("write failed: " + path);
}

ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw data_error(std::string("corrupt model file: ") + e.what());
    }

    try {
        if (j.at("format").get<std::string>() != "dafh-model-bundle") {
            throw data_error("corrupt model file: unrecognized format tag");
        }
        if (j.at("version").get<int>() != bundle_format_version) {
            throw data_error("model bundle version mismatch: expected " +
                             std::to_string(bundle_format_version));
        }
        ModelBundle b;
        b.method = j.at("method").get<std::string>();
        b.schema = schema_from_json(j.at("schema"));
        b.config = config_from_json(j.at("config"));
        b.pooled = logistic_from_json(j.at("pooled"));
        for (const auto& m : j.at("decoupled")) b.decoupled.push_back(logistic_from_json(m));
        if (j.contains("group_net")) {
            GroupMLP net;
            net.w1 = matrix_from_json(j.at("group_net").at("w1"));
            net.b1 = j.at("group_net").at("b1").get<std::vector<double>>();
            net.w2 = matrix_from_json(j.at("group_net").at("w2"));
            net.b2 = j.at("group_net").at("b2").get<std::vector<double>>();
            b.group_net = std::move(net);
        }
        if (j.contains("partition")) b.partition = partition_from_json(j.at("partition"));
        if (b.decoupled.empty()) throw data_error("corrupt model file: no decoupled models");
        for (const auto& m : b.decoupled) {
            if (m.dim() != b.pooled.dim()) {
                throw data_error("corrupt model file: inconsistent model dimensions");
            }
        }
        if (b.pooled.dim() != b.schema.dim()) {
            throw data_error("corrupt model file: model does not match schema dimension");
        }
        return b;
    } catch (const json::exception& e) {
        throw data_error(std::string("corrupt model file: ") + e.what());
    }
}

LossTable build_loss_table(const ModelBundle& bundle, const Dataset& data) {
    bundle.check_compatible(data);
    const auto assigned = bundle.assign_all(data);
    return kern::loss_table_batch(bundle.pooled, bundle.decoupled,
                                  [&](std::size_t i) { return assigned[i]; }, data.features,
                                  data.labels);
}

}  // namespace dafh

#include "dafh/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dafh/training.hpp"

namespace dafh {

using json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> metric_names = {
        "prob_fwh", "accuracy", "violations", "max_gain", "min_envy", "delta_disparity"};

json config_to_json(const TrainConfig& c) {
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
    if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("lr_group")) c.lr_group = j.at("lr_group").get<double>();
    if (j.contains("lr_decoupled")) c.lr_decoupled = j.at("lr_decoupled").get<double>();
    if (j.contains("momentum_decoupled")) {
        c.momentum_decoupled = j.at("momentum_decoupled").get<double>();
    }
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("convergence_tol")) c.convergence_tol = j.at("convergence_tol").get<double>();
    return c;
}

std::string default_label(const MethodSpec& m) {
    if (m.name == "trivial" && !m.attribute.empty()) return "trivial(" + m.attribute + ")";
    if (m.name == "cluster") return "cluster(k=" + std::to_string(m.train.k) + ")";
    if (m.name == "lr-all" && !m.attributes.empty()) {
        std::string joined;
        for (const auto& a : m.attributes) {
            if (!joined.empty()) joined += ",";
            joined += a;
        }
        return "lr-all(" + joined + ")";
    }
    return m.name;
}

ModelBundle run_cell(const MethodSpec& method, const Dataset& train, std::uint64_t cell_seed) {
    TrainConfig cfg = method.train;
    cfg.seed = cell_seed;

    if (method.name == "dafh") {
        auto [system, trace] = train_dafh(train, cfg);
        return bundle_from_system(system, train.schema);
    }
    if (method.name == "pooled") {
        const LogisticModel pooled = train_pooled(train, cfg.lr_decoupled, cfg.epochs,
                                                  cfg.batch_size, cell_seed);
        return bundle_from_pooled(pooled, train.schema, cfg);
    }
    if (method.name == "trivial") {
        const Partition part = trivial_partition(train, method.attribute, method.threshold);
        const PartitionedSystem sys = train_on_partition(train, part, cfg.lr_decoupled,
                                                         cfg.epochs, cfg.batch_size, cell_seed);
        return bundle_from_partitioned(sys, train.schema, "trivial", cfg);
    }
    if (method.name == "cluster") {
        const auto [part, state] = kmeans_partition(train, cfg.k, cell_seed);
        const PartitionedSystem sys = train_on_partition(train, part, cfg.lr_decoupled,
                                                         cfg.epochs, cfg.batch_size, cell_seed);
        return bundle_from_partitioned(sys, train.schema, "cluster", cfg);
    }
    if (method.name == "lr-all") {
        const Partition part = intersection_partition(train, method.attributes);
        const PartitionedSystem sys = train_on_partition(train, part, cfg.lr_decoupled,
                                                         cfg.epochs, cfg.batch_size, cell_seed);
        return bundle_from_partitioned(sys, train.schema, "lr-all", cfg);
    }
    if (method.name == "manual") {
        ManualRule rule = method.manual;
        rule.coin_seed = cell_seed;
        const Partition part = manual_arrest_partition(train, rule);
        const PartitionedSystem sys = train_on_partition(train, part, cfg.lr_decoupled,
                                                         cfg.epochs, cfg.batch_size, cell_seed);
        return bundle_from_partitioned(sys, train.schema, "manual", cfg);
    }
    throw std::invalid_argument("unknown method: " + method.name);
}

}  // namespace

Dataset DatasetSpec::realize() const {
    if (synthetic) return gen_synthetic(n, delta, sigma, seed);
    return load_csv(csv_path, label, sensitive);
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    const auto& ds = j.at("dataset");
    if (ds.contains("synthetic")) {
        const auto& s = ds.at("synthetic");
        cfg.dataset.synthetic = true;
        if (s.contains("n")) cfg.dataset.n = s.at("n").get<std::size_t>();
        if (s.contains("delta")) cfg.dataset.delta = s.at("delta").get<double>();
        if (s.contains("sigma")) cfg.dataset.sigma = s.at("sigma").get<double>();
        if (s.contains("seed")) cfg.dataset.seed = s.at("seed").get<std::uint64_t>();
    } else if (ds.contains("csv")) {
        const auto& s = ds.at("csv");
        cfg.dataset.synthetic = false;
        cfg.dataset.csv_path = s.at("path").get<std::string>();
        cfg.dataset.label = s.at("label").get<std::string>();
        if (s.contains("sensitive")) {
            cfg.dataset.sensitive = s.at("sensitive").get<std::vector<std::string>>();
        }
    } else {
        throw data_error("experiment config: dataset must be synthetic or csv");
    }

    if (j.contains("split")) {
        const auto& s = j.at("split");
        if (s.contains("train_fraction")) {
            cfg.split.train_fraction = s.at("train_fraction").get<double>();
        }
        if (s.contains("seed")) cfg.split.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("repeats")) cfg.repeats = j.at("repeats").get<std::size_t>();
    if (j.contains("disparity_by")) cfg.disparity_by = j.at("disparity_by").get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

    for (const auto& m : j.at("methods")) {
        MethodSpec spec;
        spec.name = m.at("name").get<std::string>();
        if (m.contains("train")) spec.train = config_from_json(m.at("train"));
        if (m.contains("attribute")) spec.attribute = m.at("attribute").get<std::string>();
        if (m.contains("threshold")) spec.threshold = m.at("threshold").get<double>();
        if (m.contains("attributes")) {
            spec.attributes = m.at("attributes").get<std::vector<std::string>>();
        }
        if (m.contains("manual")) {
            const auto& mm = m.at("manual");
            if (mm.contains("race_column")) spec.manual.race_column = mm.at("race_column");
            if (mm.contains("sex_column")) spec.manual.sex_column = mm.at("sex_column");
            if (mm.contains("age_column")) spec.manual.age_column = mm.at("age_column");
            if (mm.contains("white_value")) spec.manual.white_value = mm.at("white_value");
            if (mm.contains("male_value")) spec.manual.male_value = mm.at("male_value");
            if (mm.contains("female_value")) spec.manual.female_value = mm.at("female_value");
        }
        spec.label = m.contains("label") ? m.at("label").get<std::string>() : default_label(spec);
        cfg.methods.push_back(std::move(spec));
    }

    if (cfg.methods.empty()) throw data_error("experiment config: at least one method required");
    if (cfg.repeats < 1) throw data_error("experiment config: repeats must be >= 1");
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path);
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw data_error(std::string("experiment config: ") + e.what());
    }
}

json ExperimentConfig::to_json() const {
    json j;
    if (dataset.synthetic) {
        j["dataset"] = json{{"synthetic",
                             json{{"n", dataset.n},
                                  {"delta", dataset.delta},
                                  {"sigma", dataset.sigma},
                                  {"seed", dataset.seed}}}};
    } else {
        j["dataset"] = json{{"csv",
                             json{{"path", dataset.csv_path},
                                  {"label", dataset.label},
                                  {"sensitive", dataset.sensitive}}}};
    }
    j["split"] = json{{"train_fraction", split.train_fraction}, {"seed", split.seed}};
    j["repeats"] = repeats;
    if (!disparity_by.empty()) j["disparity_by"] = disparity_by;
    if (!output_dir.empty()) j["output_dir"] = output_dir;
    json methods_json = json::array();
    for (const auto& m : methods) {
        json mj{{"name", m.name}, {"label", m.label}, {"train", config_to_json(m.train)}};
        if (!m.attribute.empty()) mj["attribute"] = m.attribute;
        if (m.threshold) mj["threshold"] = *m.threshold;
        if (!m.attributes.empty()) mj["attributes"] = m.attributes;
        if (m.name == "manual") {
            mj["manual"] = json{{"race_column", m.manual.race_column},
                                {"sex_column", m.manual.sex_column},
                                {"age_column", m.manual.age_column},
                                {"white_value", m.manual.white_value},
                                {"male_value", m.manual.male_value},
                                {"female_value", m.manual.female_value}};
        }
        methods_json.push_back(std::move(mj));
    }
    j["methods"] = methods_json;
    return j;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_json().dump()); }

bool AggregateReport::any_failures() const {
    for (const auto& m : methods) {
        if (!m.failures.empty()) return true;
    }
    return false;
}

json AggregateReport::to_json() const {
    json j;
    j["version"] = version;
    j["config_hash"] = hex64(config_hash);
    j["split_seed"] = split_seed;
    j["repeats"] = repeats;
    json ms = json::array();
    for (const auto& m : methods) {
        json metrics = json::object();
        for (const auto& [name, stat] : m.metrics) {
            metrics[name] = json{{"mean", stat.mean}, {"std", stat.stdev},
                                 {"values", stat.values}};
        }
        ms.push_back(json{{"label", m.label}, {"metrics", metrics}, {"failures", m.failures}});
    }
    j["methods"] = ms;
    j["raw_rows"] = raw_rows;
    return j;
}

AggregateReport AggregateReport::from_json(const json& j) {
    AggregateReport r;
    r.version = j.at("version").get<std::string>();
    r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    r.split_seed = j.at("split_seed").get<std::uint64_t>();
    r.repeats = j.at("repeats").get<std::size_t>();
    for (const auto& mj : j.at("methods")) {
        MethodAggregate m;
        m.label = mj.at("label").get<std::string>();
        for (const auto& [name, sj] : mj.at("metrics").items()) {
            MetricStat stat;
            stat.mean = sj.at("mean").get<double>();
            stat.stdev = sj.at("std").get<double>();
            stat.values = sj.at("values").get<std::vector<double>>();
            m.metrics[name] = std::move(stat);
        }
        m.failures = mj.at("failures").get<std::vector<std::string>>();
        r.methods.push_back(std::move(m));
    }
    r.raw_rows = j.at("raw_rows").get<std::vector<std::string>>();
    return r;
}

std::string AggregateReport::raw_csv() const {
    std::string out = "method,repeat," + EvalReport::csv_header() + "\n";
    for (const auto& row : raw_rows) out += row + "\n";
    return out;
}

AggregateReport run_experiment(const ExperimentConfig& config) {
    const Dataset data = config.dataset.realize();

    AggregateReport report;
    report.version = version_string;
    report.config_hash = config.hash();
    report.split_seed = config.split.seed;
    report.repeats = config.repeats;

    for (const auto& method : config.methods) {
        MethodAggregate agg;
        agg.label = method.label;
        std::map<std::string, std::vector<double>> collected;

        for (std::size_t r = 0; r < config.repeats; ++r) {
            SplitSpec spec = config.split;
            spec.repeat_index = r;
            try {
                auto [train_raw, test_raw] = split(data, spec);
                auto [train, others] = standardize(std::move(train_raw), {std::move(test_raw)});
                const Dataset& test = others[0];

                const std::uint64_t cell_seed = method.train.seed + r;
                const ModelBundle bundle = run_cell(method, train, cell_seed);
                const EvalReport ev = evaluate(bundle, test, config.disparity_by);

                const double values[] = {ev.prob_fwh,  ev.accuracy, ev.violations,
                                         ev.max_gain,  ev.min_envy, ev.delta_disparity};
                for (std::size_t i = 0; i < metric_names.size(); ++i) {
                    if (!std::isnan(values[i])) collected[metric_names[i]].push_back(values[i]);
                }
                collected["min_group_size"].push_back(
                        static_cast<double>(ev.min_group_size));
                report.raw_rows.push_back(method.label + "," + std::to_string(r) + "," +
                                          ev.to_csv_row());
            } catch (const std::exception& e) {
                agg.failures.push_back("repeat " + std::to_string(r) + ": " + e.what());
                std::fprintf(stderr, "warning: %s repeat %zu failed: %s\n",
                             method.label.c_str(), r, e.what());
            }
        }

        for (const auto& [name, values] : collected) {
            MetricStat stat;
            stat.values = values;
            for (const double v : values) stat.mean += v;
            stat.mean /= static_cast<double>(values.size());
            for (const double v : values) {
                stat.stdev += (v - stat.mean) * (v - stat.mean);
            }
            stat.stdev = std::sqrt(stat.stdev / static_cast<double>(values.size()));
            agg.metrics[name] = std::move(stat);
        }
        report.methods.push_back(std::move(agg));
    }
    return report;
}

namespace {

bool is_percent_metric(const std::string& name) {
    return name == "prob_fwh" || name == "accuracy" || name == "max_gain" ||
           name == "min_envy" || name == "delta_disparity";
}

std::string format_cell(const MethodAggregate& m, const std::string& metric) {
    const auto it = m.metrics.find(metric);
    if (it == m.metrics.end()) return "N/A";
    char buf[64];
    if (is_percent_metric(metric)) {
        std::snprintf(buf, sizeof(buf), "%.2f%% ± %.2f%%", it->second.mean * 100.0,
                      it->second.stdev * 100.0);
    } else {
        std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", it->second.mean, it->second.stdev);
    }
    return buf;
}

const std::vector<std::pair<std::string, std::string>> table_columns = {
        {"prob_fwh", "Pr of w/o harm"}, {"accuracy", "Accuracy"},
        {"violations", "# violations"}, {"max_gain", "max gain"},
        {"min_envy", "min envy"},       {"delta_disparity", "Δ disparity"}};

}  // namespace

std::string render_markdown(const AggregateReport& report) {
    std::string out = "| Method |";
    for (const auto& [key, title] : table_columns) out += " " + title + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < table_columns.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& m : report.methods) {
        out += "| " + m.label + " |";
        for (const auto& [key, title] : table_columns) out += " " + format_cell(m, key) + " |";
        out += "\n";
    }
    return out;
}

std::string render_csv(const AggregateReport& report) {
    std::string out = "method";
    for (const auto& [key, title] : table_columns) out += "," + key + "_mean," + key + "_std";
    out += "\n";
    char buf[64];
    for (const auto& m : report.methods) {
        out += m.label;
        for (const auto& [key, title] : table_columns) {
            const auto it = m.metrics.find(key);
            if (it == m.metrics.end()) {
                out += ",,";
            } else {
                std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", it->second.mean,
                              it->second.stdev);
                out += buf;
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace dafh

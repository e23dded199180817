#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dafh/baselines.hpp"
#include "dafh/dataset.hpp"
#include "dafh/metrics.hpp"
#include "dafh/train_config.hpp"

namespace dafh {

struct DatasetSpec {
    bool synthetic = true;
    // synthetic generator
    std::size_t n = 20000;
    double delta = 0.4;
    double sigma = 0.3;
    std::uint64_t seed = 1;
    // csv source
    std::string csv_path;
    std::string label;
    std::vector<std::string> sensitive;

    Dataset realize() const;
};

struct MethodSpec {
    std::string name;   // dafh | pooled | trivial | cluster | lr-all | manual
    std::string label;  // display name; defaults to name (+ attribute)
    TrainConfig train;
    std::string attribute;                 // trivial
    std::optional<double> threshold;       // trivial binarize rule
    std::vector<std::string> attributes;   // lr-all
    ManualRule manual;                     // manual
};

struct ExperimentConfig {
    DatasetSpec dataset;
    SplitSpec split;
    std::size_t repeats = 5;
    std::string disparity_by;
    std::vector<std::string> composition_by;
    std::vector<MethodSpec> methods;
    std::string output_dir;

    static ExperimentConfig from_json(const nlohmann::ordered_json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::ordered_json to_json() const;
    std::uint64_t hash() const;
};

struct MetricStat {
    double mean = 0.0;
    double stdev = 0.0;  // population std over the repeat values
    std::vector<double> values;
};

struct MethodAggregate {
    std::string label;
    // metric name -> stat, over the repeats that produced a value
    std::map<std::string, MetricStat> metrics;
    std::vector<std::string> failures;  // one entry per failed repeat
};

struct AggregateReport {
    std::string version;
    std::uint64_t config_hash = 0;
    std::uint64_t split_seed = 0;
    std::size_t repeats = 0;
    std::vector<MethodAggregate> methods;
    std::vector<std::string> raw_rows;  // method,repeat,<EvalReport csv>

    bool any_failures() const;
    nlohmann::ordered_json to_json() const;
    static AggregateReport from_json(const nlohmann::ordered_json& j);
    std::string raw_csv() const;
};

// Runs every (method x repeat) cell: split, standardize on the training
// rows, train, evaluate on the held-out rows. Failed cells are recorded and
// excluded from the aggregates.
AggregateReport run_experiment(const ExperimentConfig& config);

// "97.71% ± 0.34%"-style table; rate metrics are percent with 2 decimals,
// counts stay plain numbers, missing metrics render as N/A.
std::string render_markdown(const AggregateReport& report);
std::string render_csv(const AggregateReport& report);

}  // namespace dafh

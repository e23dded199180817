// Command-line front end: synthetic data generation, joint training,
// baseline fitting, evaluation, multi-seed experiments, and report rendering.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dafh/bundle.hpp"
#include "dafh/experiment.hpp"
#include "dafh/metrics.hpp"
#include "dafh/parallel.hpp"
#include "dafh/training.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_numeric = 3;
constexpr int exit_partial = 4;

json report_to_json(const dafh::EvalReport& r) {
    json j;
    j["prob_fwh"] = r.prob_fwh;
    j["accuracy"] = r.accuracy;
    j["violations"] = r.violations;
    j["max_gain"] = r.max_gain;
    j["min_envy"] = r.min_envy;
    j["delta_disparity"] = r.delta_disparity;
    j["group_sizes"] = r.group_sizes;
    j["min_group_size"] = r.min_group_size;
    j["flags"] = r.flags;
    if (!r.composition_cells.empty()) {
        json comp;
        comp["cells"] = r.composition_cells;
        json rows = json::array();
        for (std::size_t g = 0; g < r.composition.rows; ++g) {
            rows.push_back(std::vector<double>(r.composition.row(g),
                                               r.composition.row(g) + r.composition.cols));
        }
        comp["groups"] = rows;
        j["composition"] = comp;
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dafh::data_error("cannot write file: " + path);
    out << text;
    if (!out) throw dafh::data_error("write failed: " + path);
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    for (const char c : csv) {
        if (c == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else {
            item.push_back(c);
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

struct TrainArgs {
    std::string data_path;
    std::string label = "y";
    std::string sensitive;
    dafh::TrainConfig config;
    std::string out;
    std::string trace_path;
};

struct BaselineArgs {
    std::string method;
    std::string data_path;
    std::string label = "y";
    std::string sensitive;
    std::string attribute;
    std::string attributes;
    std::optional<double> age_threshold;
    dafh::ManualRule manual;
    std::size_t k = 2;
    double lr = 1e-2;
    std::size_t epochs = 3;
    std::size_t batch = 1024;
    std::uint64_t seed = 0;
    double l2 = 0.0;
    std::string out;
};

int cmd_train(const TrainArgs& args) {
    std::size_t dropped = 0;
    dafh::Dataset raw = dafh::load_csv(args.data_path, args.label, split_list(args.sensitive),
                                       &dropped);
    auto [train, others] = dafh::standardize(std::move(raw), {});
    (void)others;

    auto [system, trace] = dafh::train_dafh(train, args.config);
    dafh::save_bundle(dafh::bundle_from_system(system, train.schema), args.out);
    const std::string trace_path =
            args.trace_path.empty() ? args.out + ".trace.csv" : args.trace_path;
    trace.write_csv(trace_path);
    std::fprintf(stderr, "wrote %s and %s\n", args.out.c_str(), trace_path.c_str());
    return exit_ok;
}

int cmd_baseline(const BaselineArgs& args) {
    dafh::Dataset raw = dafh::load_csv(args.data_path, args.label, split_list(args.sensitive));
    auto [train, others] = dafh::standardize(std::move(raw), {});
    (void)others;

    dafh::TrainConfig cfg;
    cfg.k = std::max<std::size_t>(args.k, 2);
    cfg.batch_size = args.batch;
    cfg.epochs = args.epochs;
    cfg.lr_decoupled = args.lr;
    cfg.seed = args.seed;

    dafh::ModelBundle bundle;
    if (args.method == "pooled") {
        const auto pooled = dafh::train_pooled(train, args.lr, args.epochs, args.batch,
                                               args.seed);
        bundle = dafh::bundle_from_pooled(pooled, train.schema, cfg);
    } else {
        dafh::Partition part;
        if (args.method == "trivial") {
            if (args.attribute.empty()) {
                throw std::invalid_argument("--method trivial requires --attribute");
            }
            part = dafh::trivial_partition(train, args.attribute, args.age_threshold);
        } else if (args.method == "cluster") {
            part = dafh::kmeans_partition(train, args.k, args.seed).first;
        } else if (args.method == "lr-all") {
            if (args.attributes.empty()) {
                throw std::invalid_argument("--method lr-all requires --attributes");
            }
            part = dafh::intersection_partition(train, split_list(args.attributes));
        } else if (args.method == "manual") {
            dafh::ManualRule rule = args.manual;
            rule.coin_seed = args.seed;
            part = dafh::manual_arrest_partition(train, rule);
        } else {
            throw std::invalid_argument("unknown baseline method: " + args.method);
        }
        const auto sys = dafh::train_on_partition(train, part, args.lr, args.epochs, args.batch,
                                                  args.seed, args.l2);
        bundle = dafh::bundle_from_partitioned(sys, train.schema, args.method, cfg);
    }
    dafh::save_bundle(bundle, args.out);
    std::fprintf(stderr, "wrote %s\n", args.out.c_str());
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Preference-based group fairness toolkit: learned group partitions with "
                 "decoupled classifiers, baselines, and evaluation"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "OpenMP thread cap (0 = library default)");

    // ---- gen-synth ----
    auto* gen = app.add_subcommand("gen-synth", "Write a synthetic dataset CSV");
    std::size_t gen_n = 20000;
    double gen_delta = 0.4, gen_sigma = 0.3;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--n", gen_n, "Sample count");
    gen->add_option("--delta", gen_delta, "Label shift");
    gen->add_option("--sigma", gen_sigma, "Feature noise");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--out", gen_out, "Output CSV path")->required();

    // ---- train ----
    auto* train = app.add_subcommand("train", "Jointly train the group classifier and "
                                              "decoupled classifiers");
    TrainArgs ta;
    train->add_option("--data", ta.data_path, "Training CSV")->required();
    train->add_option("--label", ta.label, "Label column");
    train->add_option("--sensitive", ta.sensitive, "Comma-separated sensitive columns");
    train->add_option("--k", ta.config.k, "Group count");
    train->add_option("--batch", ta.config.batch_size, "Mini-batch size");
    train->add_option("--epochs", ta.config.epochs, "Training epochs");
    train->add_option("--lr-group", ta.config.lr_group, "Group classifier learning rate");
    train->add_option("--lr-dec", ta.config.lr_decoupled, "Decoupled classifier learning rate");
    train->add_option("--momentum", ta.config.momentum_decoupled, "Decoupled momentum");
    train->add_option("--lambda", ta.config.lambda, "Balance penalty weight");
    train->add_option("--tau", ta.config.tau, "Surrogate loss temperature");
    train->add_option("--seed", ta.config.seed, "Training seed");
    train->add_option("--convergence-tol", ta.config.convergence_tol,
                      "Early-stop tolerance on the epoch objective (0 = off)");
    train->add_option("--out", ta.out, "Model bundle output path")->required();
    train->add_option("--trace", ta.trace_path, "Trace CSV path (default <out>.trace.csv)");

    // ---- baseline ----
    auto* base = app.add_subcommand("baseline", "Fit a partition baseline");
    BaselineArgs ba;
    base->add_option("--method", ba.method, "pooled|trivial|cluster|lr-all|manual")->required();
    base->add_option("--data", ba.data_path, "Training CSV")->required();
    base->add_option("--label", ba.label, "Label column");
    base->add_option("--sensitive", ba.sensitive, "Comma-separated sensitive columns");
    base->add_option("--attribute", ba.attribute, "Attribute for trivial partition");
    base->add_option("--attributes", ba.attributes, "Comma-separated attributes for lr-all");
    double age_threshold = 0.0;
    auto* thr = base->add_option("--age-threshold", age_threshold,
                                 "Binarize a numeric attribute at this threshold");
    base->add_option("--k", ba.k, "Cluster count for --method cluster");
    base->add_option("--lr", ba.lr, "Learning rate");
    base->add_option("--epochs", ba.epochs, "Epochs");
    base->add_option("--batch", ba.batch, "Mini-batch size");
    base->add_option("--seed", ba.seed, "Seed");
    base->add_option("--l2", ba.l2, "Optional ridge strength for the logistic fits");
    base->add_option("--race-column", ba.manual.race_column, "Manual rule: race column");
    base->add_option("--sex-column", ba.manual.sex_column, "Manual rule: sex column");
    base->add_option("--age-column", ba.manual.age_column, "Manual rule: age column");
    base->add_option("--white-value", ba.manual.white_value, "Manual rule: white category");
    base->add_option("--male-value", ba.manual.male_value, "Manual rule: male category");
    base->add_option("--female-value", ba.manual.female_value, "Manual rule: female category");
    base->add_option("--out", ba.out, "Model bundle output path")->required();

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Evaluate a model bundle on a dataset");
    std::string ev_model, ev_data, ev_disparity, ev_composition, ev_report, ev_losses;
    eval->add_option("--model", ev_model, "Model bundle path")->required();
    eval->add_option("--data", ev_data, "Evaluation CSV")->required();
    eval->add_option("--disparity-by", ev_disparity, "Sensitive column for Δ disparity");
    eval->add_option("--composition-by", ev_composition,
                     "Comma-separated sensitive columns for the composition table");
    eval->add_option("--report", ev_report, "Report JSON output path (default stdout)");
    eval->add_option("--losses", ev_losses, "Optional per-sample loss table CSV");

    // ---- experiment ----
    auto* exp = app.add_subcommand("experiment", "Run a multi-seed experiment from a config");
    std::string exp_config, exp_out;
    exp->add_option("--config", exp_config, "Experiment config JSON")->required();
    exp->add_option("--out", exp_out, "Output directory (overrides config)");

    // ---- report ----
    auto* rep = app.add_subcommand("report", "Render an aggregate report");
    std::string rep_aggregate, rep_format = "md", rep_out;
    rep->add_option("--aggregate", rep_aggregate, "Aggregate JSON path")->required();
    rep->add_option("--format", rep_format, "md or csv");
    rep->add_option("--out", rep_out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return exit_usage;
    }

    dafh::par::set_threads(threads);

    try {
        if (*gen) {
            const dafh::Dataset data = dafh::gen_synthetic(gen_n, gen_delta, gen_sigma, gen_seed);
            dafh::write_csv(data, gen_out);
            std::fprintf(stderr, "wrote %s (%zu rows)\n", gen_out.c_str(), data.size());
            return exit_ok;
        }
        if (*train) return cmd_train(ta);
        if (*base) {
            if (thr->count() > 0) ba.age_threshold = age_threshold;
            return cmd_baseline(ba);
        }
        if (*eval) {
            const dafh::ModelBundle bundle = dafh::load_bundle(ev_model);
            const dafh::RawTable raw = dafh::parse_csv(ev_data);
            const dafh::Dataset data = dafh::encode_with_schema(raw, bundle.schema);
            const dafh::EvalReport report =
                    dafh::evaluate(bundle, data, ev_disparity, split_list(ev_composition));
            if (!ev_losses.empty()) {
                dafh::write_loss_table_csv(dafh::build_loss_table(bundle, data), ev_losses);
            }
            const std::string text = report_to_json(report).dump(2) + "\n";
            if (ev_report.empty()) {
                std::cout << text;
            } else {
                write_text(ev_report, text);
            }
            return exit_ok;
        }
        if (*exp) {
            dafh::ExperimentConfig config = dafh::ExperimentConfig::from_file(exp_config);
            if (!exp_out.empty()) config.output_dir = exp_out;
            const dafh::AggregateReport report = dafh::run_experiment(config);
            if (!config.output_dir.empty()) {
                std::filesystem::create_directories(config.output_dir);
                const auto dir = std::filesystem::path(config.output_dir);
                write_text((dir / "aggregate.json").string(), report.to_json().dump(2) + "\n");
                write_text((dir / "raw.csv").string(), report.raw_csv());
                write_text((dir / "table.md").string(), render_markdown(report));
            }
            std::cout << render_markdown(report);
            return report.any_failures() ? exit_partial : exit_ok;
        }
        if (*rep) {
            std::ifstream in(rep_aggregate, std::ios::binary);
            if (!in) throw dafh::data_error("cannot open file: " + rep_aggregate);
            dafh::AggregateReport report;
            try {
                report = dafh::AggregateReport::from_json(json::parse(in));
            } catch (const json::exception& e) {
                throw dafh::data_error(std::string("bad aggregate file: ") + e.what());
            }
            if (report.methods.empty()) {
                throw std::invalid_argument("aggregate report has no methods");
            }
            std::string text;
            if (rep_format == "md") {
                text = dafh::render_markdown(report);
            } else if (rep_format == "csv") {
                text = dafh::render_csv(report);
            } else {
                throw std::invalid_argument("--format must be md or csv");
            }
            if (rep_out.empty()) {
                std::cout << text;
            } else {
                write_text(rep_out, text);
            }
            return exit_ok;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return exit_usage;
    } catch (const dafh::numeric_error& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return exit_numeric;
    } catch (const dafh::data_error& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return exit_data;
    }
    return exit_usage;
}

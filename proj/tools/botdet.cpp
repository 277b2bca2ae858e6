// botdet: NetFlow botnet C2 detection pipeline
// subcommands: synth, extract, train, predict, evaluate, explain,
//              export-timeseries, match-blacklist

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "botdet/aggregate.hpp"
#include "botdet/config.hpp"
#include "botdet/explain.hpp"
#include "botdet/features.hpp"
#include "botdet/flow.hpp"
#include "botdet/forest.hpp"
#include "botdet/labels.hpp"
#include "botdet/manifest.hpp"
#include "botdet/synth.hpp"

namespace {

using namespace botdet;

struct GlobalOpts {
    uint64_t seed = 0;
    int threads = default_threads();
    bool strict = false;      // default is lenient parsing
    bool has_header = false;  // flow CSVs are headerless unless flagged
};

RunManifest start_manifest(const std::string& command, uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.seed = seed;
    m.started_at = RunManifest::now_ms();
    return m;
}

void finish_manifest(RunManifest& m, const std::string& primary_output) {
    m.finished_at = RunManifest::now_ms();
    m.write_for(primary_output);
}

std::string digest_file_or_empty(const std::string& path) {
    return config_digest_of(path.empty() ? std::string() : read_file(path));
}

// ---------------------------------------------------------------------------
// prediction CSV helpers
// ---------------------------------------------------------------------------

struct PredictionRow {
    Ipv4 ip;
    std::string label;
    double score = 0.0;
};

const char* kPredictionHeader = "host_ip,label,score";

std::string predictions_to_csv(const std::vector<PredictionRow>& rows) {
    std::string out = kPredictionHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += format_ipv4(r.ip);
        out += ',';
        out += r.label;
        out += ',';
        out += fmt_double(r.score);
        out += '\n';
    }
    return out;
}

std::vector<PredictionRow> read_predictions(const std::string& path) {
    std::string content = read_file(path);
    std::vector<PredictionRow> rows;
    size_t pos = 0;
    bool first = true;
    size_t line_no = 0;
    while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        std::string_view line(content.data() + pos,
                              (eol == std::string::npos ? content.size() : eol) - pos);
        pos = eol == std::string::npos ? content.size() : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        if (first) {
            first = false;
            if (std::string(line) != kPredictionHeader)
                throw SchemaError(path + ": unexpected prediction header");
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != 3)
            throw DataError(path + " line " + std::to_string(line_no) + ": expected 3 fields");
        PredictionRow r;
        if (!parse_ipv4(fields[0], r.ip))
            throw DataError(path + " line " + std::to_string(line_no) + ": bad ip");
        r.label = std::string(fields[1]);
        if (!parse_double(fields[2], r.score))
            throw DataError(path + " line " + std::to_string(line_no) + ": bad score");
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string config_path;
    std::string out_flows;
    std::string out_truth;
    int bot_hosts = -1;
    int normal_hosts = -1;
    int day = 0;
};

void cmd_synth(const GlobalOpts& g, const SynthArgs& a) {
    ConfigFile cfg = load_config(a.config_path);
    NetworkConfig net = network_config_from(cfg);
    SynthProfile bot = synth_profile_from(cfg, "synth.bot", SynthProfile::bot_defaults());
    SynthProfile normal = synth_profile_from(cfg, "synth.normal", SynthProfile::normal_defaults());
    if (a.bot_hosts >= 0) bot.n_hosts = a.bot_hosts;
    if (a.normal_hosts >= 0) normal.n_hosts = a.normal_hosts;
    // days share the analysis window and differ only by their derived seeds,
    // so one config file drives the whole month
    bot.seed = derive_stream(g.seed, 2 * static_cast<uint64_t>(a.day));
    normal.seed = derive_stream(g.seed, 2 * static_cast<uint64_t>(a.day) + 1);

    RunManifest m = start_manifest("synth", g.seed);
    m.inputs = {a.config_path};
    m.config_digest = digest_file_or_empty(a.config_path);

    SynthDay day = generate_day(bot, normal, net);
    write_file_atomic(a.out_flows, flows_to_csv(day.records));
    m.outputs.push_back(a.out_flows);
    if (!a.out_truth.empty()) {
        write_file_atomic(a.out_truth, truth_to_csv(day.truth));
        m.outputs.push_back(a.out_truth);
    }
    m.extra = {{"records", day.records.size()},
               {"bot_hosts", bot.n_hosts},
               {"normal_hosts", normal.n_hosts},
               {"day", a.day},
               {"day_start", net.day_start}};
    finish_manifest(m, a.out_flows);
    std::cout << "synth: wrote " << day.records.size() << " flows for " << bot.n_hosts << " bot + "
              << normal.n_hosts << " normal hosts\n";
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string flows_path;
    std::string config_path;
    std::string out_path;
    std::string labels_path;
    std::string discards_path;
};

void cmd_extract(const GlobalOpts& g, const ExtractArgs& a) {
    ConfigFile cfg = load_config(a.config_path);
    NetworkConfig net = network_config_from(cfg);

    RunManifest m = start_manifest("extract", g.seed);
    m.inputs = {a.flows_path, a.config_path};
    m.config_digest = digest_file_or_empty(a.config_path);

    FlowFile file = read_flow_csv(a.flows_path, {.lenient = !g.strict, .has_header = g.has_header});
    GroupResult grouped = group_by_external_host(file.records, net);

    std::vector<FeatureRow> rows;
    rows.reserve(grouped.views.size());
    for (const auto& view : grouped.views) {
        FeatureRow row;
        row.host_ip = format_ipv4(view.host_ip);
        row.label = kUnknownLabel;
        row.fv = extract_features(view, net);
        rows.push_back(std::move(row));
    }
    if (!a.labels_path.empty()) {
        std::vector<std::string> warnings;
        LabelSet labels = load_blacklist(a.labels_path, &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        apply_labels(rows, {labels});
        m.inputs.push_back(a.labels_path);
    }
    write_file_atomic(a.out_path, feature_csv(rows));
    m.outputs.push_back(a.out_path);

    if (!a.discards_path.empty()) {
        std::string report = "line_ref,reason\n";
        std::vector<std::pair<size_t, std::string>> entries;
        for (const auto& e : file.errors)
            entries.emplace_back(e.line_no, std::string("parse_") + parse_error_kind_name(e.kind));
        for (const auto& d : grouped.discards) entries.emplace_back(file.line_of[d.line_ref], d.reason);
        std::sort(entries.begin(), entries.end());
        for (const auto& [line, reason] : entries)
            report += std::to_string(line) + "," + reason + "\n";
        write_file_atomic(a.discards_path, report);
        m.outputs.push_back(a.discards_path);
    }

    m.extra = {{"lines", file.total_lines},
               {"parsed", file.records.size()},
               {"skipped", file.errors.size()},
               {"discarded", grouped.discards.size()},
               {"hosts", rows.size()}};
    finish_manifest(m, a.out_path);
    std::cout << "extract: " << rows.size() << " hosts from " << file.records.size() << " flows ("
              << file.errors.size() << " lines skipped, " << grouped.discards.size()
              << " flows discarded)\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::vector<std::string> features_paths;
    std::string labels_path;
    std::string config_path;
    std::string out_model;
    size_t unknown_per_day = 1000;
    int trees = -1;
    int mtry = -1;
    int min_leaf = -1;
    int max_depth = -1;
    bool no_balance = false;
    std::vector<int> tune_grid;
};

void print_confusion(const ConfusionMatrix& cm) {
    std::cout << "              predicted\n";
    std::cout << "              malicious  unknown\n";
    std::cout << "  malicious   " << cm.tp << "\t" << cm.fn << "\n";
    std::cout << "  unknown     " << cm.fp << "\t" << cm.tn << "\n";
    std::cout << "  accuracy " << cm.accuracy() << "  error " << cm.error_rate() << "  TPR "
              << cm.tpr() << "  FPR " << cm.fpr() << "  FNR " << cm.fnr();
    if (cm.excluded) std::cout << "  (excluded " << cm.excluded << ")";
    std::cout << "\n";
}

void cmd_train(const GlobalOpts& g, const TrainArgs& a) {
    TrainConfig tc;  // 2500 trees, mtry 10 unless the config or flags say otherwise
    if (!a.config_path.empty()) tc = train_config_from(load_config(a.config_path), tc);
    if (a.trees > 0) tc.n_trees = a.trees;
    if (a.mtry > 0) tc.mtry = a.mtry;
    if (a.min_leaf > 0) tc.min_leaf_size = a.min_leaf;
    if (a.max_depth >= 0) tc.max_depth = a.max_depth;
    if (a.no_balance) tc.balance = false;
    tc.seed = g.seed;

    RunManifest m = start_manifest("train", g.seed);
    m.inputs = a.features_paths;
    m.config_digest = digest_file_or_empty(a.config_path);

    std::vector<LabelSet> lists;
    if (!a.labels_path.empty()) {
        std::vector<std::string> warnings;
        lists.push_back(load_blacklist(a.labels_path, &warnings));
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        m.inputs.push_back(a.labels_path);
    }

    std::vector<LabeledDataset> days;
    for (const auto& path : a.features_paths) {
        LabeledDataset day;
        day.rows = read_feature_csv(path);
        if (!lists.empty()) apply_labels(day.rows, lists);
        days.push_back(std::move(day));
    }
    LabeledDataset training = build_training_set(days, a.unknown_per_day, g.seed);
    DataMatrix data = to_data_matrix(training);

    size_t n_mal = 0;
    for (uint8_t l : data.labels) n_mal += l;
    std::cout << "train: " << data.n_rows() << " rows (" << n_mal << " malicious, "
              << data.n_rows() - n_mal << " unknown), " << data.n_features() << " features\n";

    if (!a.tune_grid.empty()) {
        TrainConfig tune_cfg = tc;
        tune_cfg.n_trees = std::min(tc.n_trees, 100);  // reduced forests for the sweep
        MtryResult r = tune_mtry(data, a.tune_grid, tune_cfg, g.threads);
        std::cout << "tune-mtry (" << tune_cfg.n_trees << " trees per value):\n";
        for (const auto& [v, err] : r.oob_errors)
            std::cout << "  mtry " << v << ": OOB error " << err << "\n";
        std::cout << "  selected mtry " << r.best_mtry << "\n";
        tc.mtry = r.best_mtry;
    }

    ForestModel model = train_forest(data, tc, g.threads);
    save_model(model, a.out_model);
    m.outputs.push_back(a.out_model);

    std::cout << "OOB confusion (" << tc.n_trees << " trees, mtry " << tc.mtry << ", "
              << (tc.balance ? "balanced" : "plain bootstrap") << "):\n";
    print_confusion(model.oob_stats);

    m.extra = {{"rows", data.n_rows()},
               {"malicious_rows", n_mal},
               {"n_trees", tc.n_trees},
               {"mtry", tc.mtry},
               {"balance", tc.balance},
               {"oob_error", model.oob_stats.error_rate()}};
    finish_manifest(m, a.out_model);
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string model_path;
    std::string features_path;
    std::string out_path;
    double threshold = 0.5;
};

void cmd_predict(const GlobalOpts& g, const PredictArgs& a) {
    RunManifest m = start_manifest("predict", g.seed);
    m.inputs = {a.model_path, a.features_path};
    m.config_digest = config_digest_of("");

    ForestModel model = load_model(a.model_path);
    std::vector<FeatureRow> rows = read_feature_csv(a.features_path);

    std::vector<PredictionRow> predictions;
    predictions.reserve(rows.size());
    for (const auto& row : rows) {
        Verdict v = predict(model, row.fv.values);
        PredictionRow p;
        if (!parse_ipv4(row.host_ip, p.ip)) throw DataError("bad host_ip in features: " + row.host_ip);
        p.score = v.score;
        p.label = v.score >= a.threshold ? "malicious" : kUnknownLabel;
        predictions.push_back(std::move(p));
    }
    std::sort(predictions.begin(), predictions.end(), [](const auto& x, const auto& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.ip < y.ip;
    });
    write_file_atomic(a.out_path, predictions_to_csv(predictions));
    m.outputs.push_back(a.out_path);
    size_t n_mal = 0;
    for (const auto& p : predictions) n_mal += p.label != kUnknownLabel;
    m.extra = {{"rows", predictions.size()}, {"malicious", n_mal}, {"threshold", a.threshold}};
    finish_manifest(m, a.out_path);
    std::cout << "predict: " << predictions.size() << " hosts, " << n_mal
              << " flagged malicious at threshold " << a.threshold << "\n";
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string predictions_path;
    std::string truth_path;
    std::string out_path;
    double threshold = 0.5;
};

void cmd_evaluate(const GlobalOpts& g, const EvaluateArgs& a) {
    RunManifest m = start_manifest("evaluate", g.seed);
    m.inputs = {a.predictions_path, a.truth_path};
    m.config_digest = config_digest_of("");

    std::vector<PredictionRow> predictions = read_predictions(a.predictions_path);
    LabelSet truth = load_blacklist(a.truth_path);

    ConfusionMatrix cm;
    for (const auto& p : predictions) {
        uint8_t truth_label = truth.family_of(p.ip) ? 1 : 0;
        uint8_t predicted = p.score >= a.threshold ? 1 : 0;
        cm.add(truth_label, predicted);
    }
    nlohmann::ordered_json j = {{"threshold", a.threshold},
                                {"tp", cm.tp},
                                {"fp", cm.fp},
                                {"tn", cm.tn},
                                {"fn", cm.fn},
                                {"accuracy", cm.accuracy()},
                                {"error", cm.error_rate()},
                                {"tpr", cm.tpr()},
                                {"fpr", cm.fpr()},
                                {"fnr", cm.fnr()}};
    write_file_atomic(a.out_path, j.dump(2) + "\n");
    m.outputs.push_back(a.out_path);
    finish_manifest(m, a.out_path);
    print_confusion(cm);
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainArgs {
    std::string model_path;
    std::string features_path;
    std::string out_dir;
    std::vector<std::string> pdp_features;
    bool all_pdp = false;
    int grid_size = 20;
    int repeats = 5;
    int top_k = 11;
};

void cmd_explain(const GlobalOpts& g, const ExplainArgs& a) {
    RunManifest m = start_manifest("explain", g.seed);
    m.inputs = {a.model_path, a.features_path};
    m.config_digest = config_digest_of("");

    ForestModel model = load_model(a.model_path);
    LabeledDataset dataset;
    dataset.rows = read_feature_csv(a.features_path);
    DataMatrix data = to_data_matrix(dataset);
    if (data.feature_names != model.feature_names)
        throw SchemaError("feature file schema does not match model");

    // a deserialized model has no in-bag bookkeeping: treat the supplied
    // dataset as held out for every tree
    for (auto& tree : model.trees) {
        tree.oob.resize(data.n_rows());
        for (size_t i = 0; i < data.n_rows(); ++i) tree.oob[i] = static_cast<uint32_t>(i);
    }

    Rng rng(derive_stream(g.seed, 0xe8b1a));
    ImportanceReport report = importance_report(model, data, rng, a.repeats, a.top_k);

    std::string importance_path = a.out_dir + "/importance.csv";
    write_file_atomic(importance_path, multiway_importance_csv(report));
    m.outputs.push_back(importance_path);

    std::vector<std::string> pdp_targets = a.pdp_features;
    if (a.all_pdp) {
        pdp_targets.assign(model.feature_names.begin(), model.feature_names.end());
    } else if (pdp_targets.empty()) {
        // default: top two features by mean minimal depth
        std::vector<const FeatureImportance*> by_depth;
        for (const auto& f : report.features) by_depth.push_back(&f);
        std::sort(by_depth.begin(), by_depth.end(), [](const auto* x, const auto* y) {
            if (x->mean_min_depth != y->mean_min_depth) return x->mean_min_depth < y->mean_min_depth;
            return x->name < y->name;
        });
        for (size_t i = 0; i < by_depth.size() && i < 2; ++i)
            pdp_targets.push_back(by_depth[i]->name);
    }

    std::vector<PDPCurve> curves;
    for (const auto& feature : pdp_targets) {
        PDPCurve curve = partial_dependence(model, data, feature, a.grid_size);
        std::string path = a.out_dir + "/pdp_" + feature + ".csv";
        write_file_atomic(path, pdp_csv(curve));
        m.outputs.push_back(path);
        curves.push_back(std::move(curve));
    }

    std::string summary_path = a.out_dir + "/summary.json";
    write_file_atomic(summary_path, explain_summary_json(report, curves).dump(2) + "\n");
    m.outputs.push_back(summary_path);
    finish_manifest(m, summary_path);
    std::cout << "explain: wrote importance table, " << curves.size() << " PDP curves, summary\n";
}

// ---------------------------------------------------------------------------
// export-timeseries
// ---------------------------------------------------------------------------

struct ExportTsArgs {
    std::string flows_path;
    std::string config_path;
    std::string out_path;
    std::string labels_path;
};

void cmd_export_timeseries(const GlobalOpts& g, const ExportTsArgs& a) {
    ConfigFile cfg = load_config(a.config_path);
    NetworkConfig net = network_config_from(cfg);

    RunManifest m = start_manifest("export-timeseries", g.seed);
    m.inputs = {a.flows_path, a.config_path};
    m.config_digest = digest_file_or_empty(a.config_path);

    FlowFile file = read_flow_csv(a.flows_path, {.lenient = !g.strict, .has_header = g.has_header});
    GroupResult grouped = group_by_external_host(file.records, net);

    LabelSet labels;
    if (!a.labels_path.empty()) {
        labels = load_blacklist(a.labels_path);
        m.inputs.push_back(a.labels_path);
    }
    std::string csv = export_timeseries_matrix(grouped.views, [&](Ipv4 ip) {
        auto fam = labels.family_of(ip);
        return fam ? *fam : std::string();
    });
    write_file_atomic(a.out_path, csv);
    m.outputs.push_back(a.out_path);
    m.extra = {{"hosts", grouped.views.size()}};
    finish_manifest(m, a.out_path);
    std::cout << "export-timeseries: " << grouped.views.size() << " rows\n";
}

// ---------------------------------------------------------------------------
// match-blacklist
// ---------------------------------------------------------------------------

struct MatchArgs {
    std::string predictions_path;
    std::vector<std::string> blacklist_paths;
    std::string out_csv;
    std::string out_json;
};

void cmd_match_blacklist(const GlobalOpts& g, const MatchArgs& a) {
    RunManifest m = start_manifest("match-blacklist", g.seed);
    m.inputs = {a.predictions_path};
    m.config_digest = config_digest_of("");

    std::vector<PredictionRow> predictions = read_predictions(a.predictions_path);
    std::vector<LabelSet> lists;
    for (const auto& path : a.blacklist_paths) {
        lists.push_back(load_blacklist(path));
        m.inputs.push_back(path);
    }
    std::vector<HostScore> scores;
    scores.reserve(predictions.size());
    for (const auto& p : predictions) scores.push_back({p.ip, p.score});
    MatchReport report = match_predictions(scores, lists);

    std::string csv = "host_ip,score,matched,sources,families\n";
    for (const auto& e : report.entries) {
        csv += format_ipv4(e.ip);
        csv += ',';
        csv += fmt_double(e.score);
        csv += ',';
        csv += e.matched() ? "true" : "false";
        csv += ',';
        for (size_t i = 0; i < e.matched_sources.size(); ++i) {
            if (i) csv += ';';
            csv += e.matched_sources[i];
        }
        csv += ',';
        for (size_t i = 0; i < e.families.size(); ++i) {
            if (i) csv += ';';
            csv += e.families[i];
        }
        csv += '\n';
    }
    write_file_atomic(a.out_csv, csv);
    m.outputs.push_back(a.out_csv);

    nlohmann::ordered_json j = {{"predictions", report.n_predictions},
                                {"matched", report.n_matched},
                                {"match_rate", report.match_rate}};
    if (report.median_matched_score)
        j["median_matched_score"] = *report.median_matched_score;
    else
        j["median_matched_score"] = nullptr;
    write_file_atomic(a.out_json, j.dump(2) + "\n");
    m.outputs.push_back(a.out_json);
    finish_manifest(m, a.out_csv);
    std::cout << "match-blacklist: " << report.n_matched << "/" << report.n_predictions
              << " matched (rate " << report.match_rate << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"botdet: botnet C2 detection from NetFlow records"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", botdet::kToolVersion);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "seed for all randomness (no wall-clock entropy)");
    app.add_option("--threads", g.threads, "worker threads for training");
    app.add_flag("--strict", g.strict, "fail on corrupt flow lines instead of skipping");
    bool lenient_flag = false;
    app.add_flag("--lenient", lenient_flag, "skip corrupt flow lines (default)");
    app.add_flag("--header", g.has_header, "flow CSVs start with a header row");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic NetFlow day");
    synth->add_option("--config", synth_args.config_path, "config file")->required();
    synth->add_option("--out", synth_args.out_flows, "output flow CSV")->required();
    synth->add_option("--truth", synth_args.out_truth, "output truth label CSV");
    synth->add_option("--bot-hosts", synth_args.bot_hosts, "override bot host count");
    synth->add_option("--normal-hosts", synth_args.normal_hosts, "override normal host count");
    synth->add_option("--day", synth_args.day, "day index (shifts window and per-day seeds)");

    ExtractArgs extract_args;
    auto* extract = app.add_subcommand("extract", "aggregate flows per external host and extract features");
    extract->add_option("--flows", extract_args.flows_path, "input flow CSV")->required();
    extract->add_option("--config", extract_args.config_path, "config file")->required();
    extract->add_option("--out", extract_args.out_path, "output feature CSV")->required();
    extract->add_option("--labels", extract_args.labels_path, "blacklist CSV to label hosts");
    extract->add_option("--discards", extract_args.discards_path, "discard report CSV");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train the down-sampled balanced random forest");
    train->add_option("--features", train_args.features_paths, "feature CSVs, one per day")
        ->required();
    train->add_option("--labels", train_args.labels_path, "blacklist CSV applied before training");
    train->add_option("--config", train_args.config_path, "config file with a [train] section");
    train->add_option("--out", train_args.out_model, "output model JSON")->required();
    train->add_option("--unknown-per-day", train_args.unknown_per_day,
                      "unknown rows sampled per day");
    train->add_option("--trees", train_args.trees, "number of trees");
    train->add_option("--mtry", train_args.mtry, "features sampled per split");
    train->add_option("--min-leaf", train_args.min_leaf, "minimum rows per leaf");
    train->add_option("--max-depth", train_args.max_depth, "depth cap (0 = unlimited)");
    train->add_flag("--no-balance", train_args.no_balance, "plain bootstrap baseline");
    train->add_option("--tune-mtry", train_args.tune_grid, "mtry grid to sweep before training");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "score hosts with a trained model");
    predict_cmd->add_option("--model", predict_args.model_path, "model JSON")->required();
    predict_cmd->add_option("--features", predict_args.features_path, "feature CSV")->required();
    predict_cmd->add_option("--out", predict_args.out_path, "output prediction CSV")->required();
    predict_cmd->add_option("--threshold", predict_args.threshold,
                            "malicious score threshold (default majority vote)");

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "confusion matrix of predictions vs truth labels");
    evaluate->add_option("--predictions", eval_args.predictions_path, "prediction CSV")->required();
    evaluate->add_option("--truth", eval_args.truth_path, "truth label CSV")->required();
    evaluate->add_option("--out", eval_args.out_path, "output report JSON")->required();
    evaluate->add_option("--threshold", eval_args.threshold, "malicious score threshold");

    ExplainArgs explain_args;
    auto* explain = app.add_subcommand("explain", "importance statistics and partial dependence curves");
    explain->add_option("--model", explain_args.model_path, "model JSON")->required();
    explain->add_option("--features", explain_args.features_path, "feature CSV")->required();
    explain->add_option("--out-dir", explain_args.out_dir, "output directory (must exist)")
        ->required();
    explain->add_option("--pdp-feature", explain_args.pdp_features,
                        "feature(s) to compute PDP for (default: top 2 by minimal depth)");
    explain->add_flag("--all-pdp", explain_args.all_pdp, "PDP for every schema feature");
    explain->add_option("--grid", explain_args.grid_size, "PDP grid size");
    explain->add_option("--repeats", explain_args.repeats, "permutation repeats for VIMP");
    explain->add_option("--top-k", explain_args.top_k, "features flagged is_top");

    ExportTsArgs ts_args;
    auto* export_ts = app.add_subcommand("export-timeseries",
                                         "per-host 288x(flows,packets,bytes) matrix for the DL pipeline");
    export_ts->add_option("--flows", ts_args.flows_path, "input flow CSV")->required();
    export_ts->add_option("--config", ts_args.config_path, "config file")->required();
    export_ts->add_option("--out", ts_args.out_path, "output matrix CSV")->required();
    export_ts->add_option("--labels", ts_args.labels_path, "truth labels for the label column");

    MatchArgs match_args;
    auto* match = app.add_subcommand("match-blacklist", "match predictions against blacklists");
    match->add_option("--predictions", match_args.predictions_path, "prediction CSV")->required();
    match->add_option("--blacklist", match_args.blacklist_paths, "blacklist CSV (repeatable)")
        ->required();
    match->add_option("--out-csv", match_args.out_csv, "per-IP match CSV")->required();
    match->add_option("--out-json", match_args.out_json, "summary JSON")->required();

    try {
        app.parse(argc, argv);
        if (g.threads < 1) g.threads = 1;
        if (synth->parsed()) cmd_synth(g, synth_args);
        if (extract->parsed()) cmd_extract(g, extract_args);
        if (train->parsed()) cmd_train(g, train_args);
        if (predict_cmd->parsed()) cmd_predict(g, predict_args);
        if (evaluate->parsed()) cmd_evaluate(g, eval_args);
        if (explain->parsed()) cmd_explain(g, explain_args);
        if (export_ts->parsed()) cmd_export_timeseries(g, ts_args);
        if (match->parsed()) cmd_match_blacklist(g, match_args);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const botdet::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const botdet::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const botdet::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "botdet/forest.hpp"

namespace botdet {

// ---------------------------------------------------------------------------
// Permutation importance (VIMP): mean OOB accuracy drop when one feature's
// column is shuffled across the evaluation rows.
// ---------------------------------------------------------------------------

inline double oob_accuracy_with_permuted_column(const ForestModel& model, const DataMatrix& data,
                                                int col, const std::vector<uint32_t>& perm) {
    return confusion_from_votes(oob_vote_counts(model, data, col, &perm), data.labels).accuracy();
}

struct FeatureImportance {
    std::string name;
    double vimp = 0.0;
    double mean_min_depth = 0.0;
    uint64_t times_a_root = 0;
    uint64_t n_nodes = 0;
    bool is_top = false;
};

struct ImportanceReport {
    std::vector<FeatureImportance> features;  // schema order
    uint64_t n_trees = 0;
    double baseline_oob_accuracy = 0.0;
};

inline std::vector<double> permutation_importance(const ForestModel& model, const DataMatrix& data,
                                                  Rng& rng, int repeats = 5) {
    double baseline = oob_evaluate(model, data).accuracy();
    std::vector<double> vimp(data.n_features(), 0.0);
    std::vector<uint32_t> perm(data.n_rows());
    for (size_t f = 0; f < data.n_features(); ++f) {
        double drop_sum = 0.0;
        for (int rep = 0; rep < repeats; ++rep) {
            for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<uint32_t>(i);
            rng.shuffle(perm);
            drop_sum += baseline - oob_accuracy_with_permuted_column(model, data,
                                                                     static_cast<int>(f), perm);
        }
        vimp[f] = drop_sum / repeats;
    }
    return vimp;
}

// ---------------------------------------------------------------------------
// Minimal depth and forest-structure statistics
// ---------------------------------------------------------------------------

struct MinimalDepthStats {
    std::vector<double> mean_min_depth;   // per feature
    std::vector<uint64_t> times_a_root;   // trees whose root splits on the feature
    std::vector<uint64_t> n_nodes;        // internal nodes splitting on the feature
};

// Minimal depth of v in a tree = depth of the shallowest node splitting on v
// (root = 0). Trees where v never appears contribute D_t + 1, D_t being the
// depth of the tree's deepest node, so the mean stays comparable.
inline MinimalDepthStats minimal_depth_stats(const ForestModel& model) {
    const size_t d = model.feature_names.size();
    MinimalDepthStats out;
    out.mean_min_depth.assign(d, 0.0);
    out.times_a_root.assign(d, 0);
    out.n_nodes.assign(d, 0);
    if (model.trees.empty()) return out;

    std::vector<double> depth_sum(d, 0.0);
    std::vector<int> min_depth(d);
    std::vector<int> node_depth;
    for (const auto& tree : model.trees) {
        std::fill(min_depth.begin(), min_depth.end(), -1);
        node_depth.assign(tree.nodes.size(), 0);
        int tree_depth = 0;
        for (size_t i = 0; i < tree.nodes.size(); ++i) {
            const TreeNode& n = tree.nodes[i];
            tree_depth = std::max(tree_depth, node_depth[i]);
            if (n.feature < 0) continue;
            size_t f = static_cast<size_t>(n.feature);
            out.n_nodes[f] += 1;
            if (min_depth[f] < 0 || node_depth[i] < min_depth[f]) min_depth[f] = node_depth[i];
            node_depth[static_cast<size_t>(n.left)] = node_depth[i] + 1;
            node_depth[static_cast<size_t>(n.right)] = node_depth[i] + 1;
        }
        if (!tree.nodes.empty() && tree.nodes[0].feature >= 0)
            out.times_a_root[static_cast<size_t>(tree.nodes[0].feature)] += 1;
        for (size_t f = 0; f < d; ++f)
            depth_sum[f] += min_depth[f] >= 0 ? min_depth[f] : tree_depth + 1;
    }
    for (size_t f = 0; f < d; ++f)
        out.mean_min_depth[f] = depth_sum[f] / static_cast<double>(model.trees.size());
    return out;
}

// Bundles VIMP + structural statistics and flags the top-k features by
// smallest mean minimal depth.
inline ImportanceReport importance_report(const ForestModel& model, const DataMatrix& data,
                                          Rng& rng, int repeats = 5, int top_k = 11) {
    ImportanceReport report;
    report.n_trees = model.n_trees();
    report.baseline_oob_accuracy = oob_evaluate(model, data).accuracy();
    std::vector<double> vimp = permutation_importance(model, data, rng, repeats);
    MinimalDepthStats md = minimal_depth_stats(model);
    for (size_t f = 0; f < model.feature_names.size(); ++f) {
        FeatureImportance fi;
        fi.name = model.feature_names[f];
        fi.vimp = vimp[f];
        fi.mean_min_depth = md.mean_min_depth[f];
        fi.times_a_root = md.times_a_root[f];
        fi.n_nodes = md.n_nodes[f];
        report.features.push_back(std::move(fi));
    }
    std::vector<size_t> order(report.features.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const auto& fa = report.features[a];
        const auto& fb = report.features[b];
        if (fa.mean_min_depth != fb.mean_min_depth) return fa.mean_min_depth < fb.mean_min_depth;
        if (fa.times_a_root != fb.times_a_root) return fa.times_a_root > fb.times_a_root;
        return fa.name < fb.name;
    });
    for (size_t i = 0; i < order.size() && i < static_cast<size_t>(top_k); ++i)
        report.features[order[i]].is_top = true;
    return report;
}

// ---------------------------------------------------------------------------
// Partial dependence
// ---------------------------------------------------------------------------

struct PDPCurve {
    std::string feature;
    std::vector<double> grid;            // strictly ascending
    std::vector<double> avg_prediction;  // mean malicious score per grid value
};

inline int feature_index(const ForestModel& model, const std::string& feature) {
    for (size_t i = 0; i < model.feature_names.size(); ++i)
        if (model.feature_names[i] == feature) return static_cast<int>(i);
    throw SchemaError("unknown feature: " + feature);
}

// Empirical PDP: quantile-spaced grid over the dataset's column; at each grid
// value the feature is substituted into every row and the malicious score
// averaged (Monte-Carlo marginalization over the other features).
inline PDPCurve partial_dependence(const ForestModel& model, const DataMatrix& data,
                                   const std::string& feature, int grid_size = 20) {
    if (data.n_rows() == 0) throw DataError("partial_dependence: empty dataset");
    const size_t col = static_cast<size_t>(feature_index(model, feature));

    std::vector<double> values;
    for (size_t r = 0; r < data.n_rows(); ++r) {
        double v = data.at(r, col);
        if (!std::isnan(v)) values.push_back(v);
    }
    if (values.empty()) throw DataError("partial_dependence: feature has no observed values");
    std::sort(values.begin(), values.end());

    PDPCurve curve;
    curve.feature = feature;
    if (grid_size < 2) grid_size = 2;
    for (int i = 0; i < grid_size; ++i) {
        size_t idx = static_cast<size_t>(static_cast<int64_t>(i) *
                                         static_cast<int64_t>(values.size() - 1) / (grid_size - 1));
        double g = values[idx];
        if (curve.grid.empty() || g > curve.grid.back()) curve.grid.push_back(g);
    }

    std::vector<double> row(data.n_features());
    for (double g : curve.grid) {
        double score_sum = 0.0;
        for (size_t r = 0; r < data.n_rows(); ++r) {
            for (size_t c = 0; c < data.n_features(); ++c) row[c] = data.at(r, c);
            row[col] = g;
            score_sum += predict(model, row).score;
        }
        curve.avg_prediction.push_back(score_sum / static_cast<double>(data.n_rows()));
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

inline std::string multiway_importance_csv(const ImportanceReport& report) {
    std::string out = "feature,mean_min_depth,times_a_root,n_nodes,vimp,is_top\n";
    for (const auto& f : report.features) {
        out += f.name;
        out += ',';
        out += fmt_double(f.mean_min_depth);
        out += ',';
        out += std::to_string(f.times_a_root);
        out += ',';
        out += std::to_string(f.n_nodes);
        out += ',';
        out += fmt_double(f.vimp);
        out += ',';
        out += f.is_top ? "true" : "false";
        out += '\n';
    }
    return out;
}

inline std::string pdp_csv(const PDPCurve& curve) {
    std::string out = "grid_value,avg_malicious_score\n";
    for (size_t i = 0; i < curve.grid.size(); ++i) {
        out += fmt_double(curve.grid[i]);
        out += ',';
        out += fmt_double(curve.avg_prediction[i]);
        out += '\n';
    }
    return out;
}

inline nlohmann::ordered_json explain_summary_json(const ImportanceReport& report,
                                                   const std::vector<PDPCurve>& curves) {
    nlohmann::ordered_json j;
    j["n_trees"] = report.n_trees;
    j["baseline_oob_accuracy"] = report.baseline_oob_accuracy;
    nlohmann::ordered_json feats = nlohmann::ordered_json::array();
    for (const auto& f : report.features) {
        feats.push_back({{"feature", f.name},
                         {"vimp", f.vimp},
                         {"mean_min_depth", f.mean_min_depth},
                         {"times_a_root", f.times_a_root},
                         {"n_nodes", f.n_nodes},
                         {"is_top", f.is_top}});
    }
    j["importance"] = std::move(feats);
    nlohmann::ordered_json jp = nlohmann::ordered_json::object();
    for (const auto& c : curves)
        jp[c.feature] = {{"grid", c.grid}, {"avg_prediction", c.avg_prediction}};
    j["pdp"] = std::move(jp);
    return j;
}

}  // namespace botdet

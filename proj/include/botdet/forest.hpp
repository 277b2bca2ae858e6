#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "botdet/labels.hpp"
#include "botdet/rng.hpp"
#include "botdet/util.hpp"

namespace botdet {

// ---------------------------------------------------------------------------
// Generic training matrix (NaN = missing). The netflow pipeline feeds this via
// to_data_matrix(); tests feed it synthetic columns directly.
// ---------------------------------------------------------------------------

struct DataMatrix {
    std::vector<std::string> feature_names;
    std::vector<double> values;   // row-major
    std::vector<uint8_t> labels;  // 1 = malicious, 0 = unknown

    size_t n_rows() const { return labels.size(); }
    size_t n_features() const { return feature_names.size(); }
    double at(size_t row, size_t col) const { return values[row * n_features() + col]; }

    void add_row(std::span<const double> row, uint8_t label) {
        if (row.size() != n_features()) throw SchemaError("row width does not match feature count");
        values.insert(values.end(), row.begin(), row.end());
        labels.push_back(label);
    }
};

inline DataMatrix to_data_matrix(const LabeledDataset& dataset) {
    DataMatrix m;
    m.feature_names.assign(feature_names().begin(), feature_names().end());
    m.values.reserve(dataset.rows.size() * kFeatureCount);
    for (const auto& row : dataset.rows) {
        m.values.insert(m.values.end(), row.fv.values.begin(), row.fv.values.end());
        m.labels.push_back(is_malicious_label(row.label) ? 1 : 0);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Configuration, trees, model
// ---------------------------------------------------------------------------

struct TrainConfig {
    int n_trees = 2500;
    int mtry = 10;
    int min_leaf_size = 1;
    int max_depth = 0;  // 0 = unlimited
    uint64_t seed = 0;
    bool balance = true;  // down-sampled balanced bootstrap per tree
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf; missing values always route left
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    uint32_t n_malicious = 0;  // in-bag class counts at this node
    uint32_t n_unknown = 0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    std::vector<uint32_t> in_bag;  // drawn row indices (multiset, sorted)
    std::vector<uint32_t> oob;     // rows never drawn, sorted

    bool is_leaf(int i) const { return nodes[static_cast<size_t>(i)].feature < 0; }

    int route(std::span<const double> row) const {
        int i = 0;
        while (!is_leaf(i)) {
            const TreeNode& n = nodes[static_cast<size_t>(i)];
            double v = row[static_cast<size_t>(n.feature)];
            i = (std::isnan(v) || v < n.threshold) ? n.left : n.right;
        }
        return i;
    }

    // 1 = malicious; leaf ties go to malicious
    uint8_t vote(std::span<const double> row) const {
        const TreeNode& leaf = nodes[static_cast<size_t>(route(row))];
        return leaf.n_malicious >= leaf.n_unknown ? 1 : 0;
    }
};

struct ConfusionMatrix {
    uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    uint64_t excluded = 0;  // rows with no OOB vote

    uint64_t total() const { return tp + fp + tn + fn; }
    double accuracy() const { return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0; }
    double error_rate() const { return total() ? 1.0 - accuracy() : 0.0; }
    double tpr() const { return (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
    double fpr() const { return (fp + tn) ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0; }
    double fnr() const { return (tp + fn) ? static_cast<double>(fn) / static_cast<double>(tp + fn) : 0.0; }

    void add(uint8_t truth, uint8_t predicted) {
        if (truth && predicted) ++tp;
        else if (!truth && predicted) ++fp;
        else if (!truth && !predicted) ++tn;
        else ++fn;
    }
};

constexpr int kModelVersion = 1;

struct ForestModel {
    TrainConfig config;
    std::vector<std::string> feature_names;
    std::vector<DecisionTree> trees;
    ConfusionMatrix oob_stats;

    size_t n_trees() const { return trees.size(); }
};

struct Verdict {
    bool malicious = false;
    double score = 0.0;  // fraction of trees voting malicious
};

// ---------------------------------------------------------------------------
// Bootstrap sampling
// ---------------------------------------------------------------------------

struct BootstrapSample {
    std::vector<uint32_t> in_bag;  // sorted multiset of drawn rows
    std::vector<uint32_t> oob;     // sorted, rows never drawn
};

// balance=true: a bootstrap of the minority class plus an equally sized
// bootstrap of the majority class. balance=false: a plain n-of-n bootstrap.
inline BootstrapSample balanced_bootstrap(const std::vector<uint8_t>& labels, bool balance, Rng& rng) {
    const size_t n = labels.size();
    std::vector<uint32_t> malicious_idx, unknown_idx;
    for (size_t i = 0; i < n; ++i)
        (labels[i] ? malicious_idx : unknown_idx).push_back(static_cast<uint32_t>(i));

    BootstrapSample out;
    std::vector<uint8_t> drawn(n, 0);
    auto draw_from = [&](const std::vector<uint32_t>& pool, size_t count) {
        for (size_t i = 0; i < count; ++i) {
            uint32_t row = pool[static_cast<size_t>(rng.uniform_int(pool.size()))];
            out.in_bag.push_back(row);
            drawn[row] = 1;
        }
    };
    if (balance) {
        if (malicious_idx.empty() || unknown_idx.empty())
            throw DataError("balanced bootstrap requires both classes");
        // tie on equal sizes: treat malicious as the minority
        bool malicious_minority = malicious_idx.size() <= unknown_idx.size();
        const auto& minority = malicious_minority ? malicious_idx : unknown_idx;
        const auto& majority = malicious_minority ? unknown_idx : malicious_idx;
        draw_from(minority, minority.size());
        draw_from(majority, minority.size());
    } else {
        if (n == 0) throw DataError("bootstrap of empty dataset");
        std::vector<uint32_t> all(n);
        for (size_t i = 0; i < n; ++i) all[i] = static_cast<uint32_t>(i);
        draw_from(all, n);
    }
    std::sort(out.in_bag.begin(), out.in_bag.end());
    for (size_t i = 0; i < n; ++i)
        if (!drawn[i]) out.oob.push_back(static_cast<uint32_t>(i));
    return out;
}

// ---------------------------------------------------------------------------
// CART growth with exact integer Gini comparisons
// ---------------------------------------------------------------------------

namespace detail {

// Weighted Gini over a binary split is minimized exactly when
//   g = (malL^2 + unkL^2)/nL + (malR^2 + unkR^2)/nR
// is maximized; comparisons stay in integers so tie-breaking is exact.
struct SplitScore {
    uint64_t sum_sq_left = 0;  // malL^2 + unkL^2
    uint64_t n_left = 0;
    uint64_t sum_sq_right = 0;
    uint64_t n_right = 0;
};

// sign of g(a) - g(b)
inline int compare_scores(const SplitScore& a, const SplitScore& b) {
    using i128 = __int128;
    i128 num_a = static_cast<i128>(a.sum_sq_left) * a.n_right + static_cast<i128>(a.sum_sq_right) * a.n_left;
    i128 num_b = static_cast<i128>(b.sum_sq_left) * b.n_right + static_cast<i128>(b.sum_sq_right) * b.n_left;
    i128 lhs = num_a * (static_cast<i128>(b.n_left) * b.n_right);
    i128 rhs = num_b * (static_cast<i128>(a.n_left) * a.n_right);
    if (lhs > rhs) return 1;
    if (lhs < rhs) return -1;
    return 0;
}

// true iff the split strictly reduces impurity vs the unsplit node
inline bool improves(const SplitScore& s, uint64_t mal, uint64_t unk) {
    using i128 = __int128;
    uint64_t n = mal + unk;
    i128 lhs = (static_cast<i128>(s.sum_sq_left) * s.n_right + static_cast<i128>(s.sum_sq_right) * s.n_left) * n;
    i128 rhs = (static_cast<i128>(mal) * mal + static_cast<i128>(unk) * unk) *
               (static_cast<i128>(s.n_left) * s.n_right);
    return lhs > rhs;
}

struct BestSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    SplitScore score;
};

// mtry distinct features via partial Fisher-Yates
inline std::vector<int> sample_features(size_t n_features, int mtry, Rng& rng) {
    std::vector<int> idx(n_features);
    for (size_t i = 0; i < n_features; ++i) idx[i] = static_cast<int>(i);
    int k = std::min<int>(mtry, static_cast<int>(n_features));
    for (int i = 0; i < k; ++i) {
        size_t j = static_cast<size_t>(i) + static_cast<size_t>(rng.uniform_int(n_features - static_cast<size_t>(i)));
        std::swap(idx[static_cast<size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<size_t>(k));
    return idx;
}

}  // namespace detail

// Grows one CART tree on the given in-bag multiset. At every node mtry
// features are drawn without replacement; candidate thresholds are midpoints
// between consecutive distinct in-bag values; missing values route left.
// Only strict impurity improvements displace the incumbent, so ties go to the
// earliest candidate in the sampled feature order (lowest threshold within a
// feature).
inline DecisionTree train_tree(const DataMatrix& data, BootstrapSample sample,
                               const TrainConfig& config, Rng& rng) {
    DecisionTree tree;
    tree.in_bag = std::move(sample.in_bag);
    tree.oob = std::move(sample.oob);

    struct Pending {
        int node;
        std::vector<uint32_t> rows;
        int depth;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, tree.in_bag, 0});

    std::vector<std::pair<double, uint8_t>> scratch;  // (value, label)

    while (!stack.empty()) {
        Pending item = std::move(stack.back());
        stack.pop_back();

        uint64_t mal = 0, unk = 0;
        for (uint32_t r : item.rows) (data.labels[r] ? mal : unk) += 1;
        {
            TreeNode& node = tree.nodes[static_cast<size_t>(item.node)];
            node.n_malicious = static_cast<uint32_t>(mal);
            node.n_unknown = static_cast<uint32_t>(unk);
        }

        bool depth_capped = config.max_depth > 0 && item.depth >= config.max_depth;
        if (mal == 0 || unk == 0 || depth_capped ||
            item.rows.size() < 2 * static_cast<size_t>(config.min_leaf_size)) {
            continue;  // leaf (feature stays -1)
        }

        detail::BestSplit best;
        for (int f : detail::sample_features(data.n_features(), config.mtry, rng)) {
            scratch.clear();
            uint64_t missing_mal = 0, missing_unk = 0;
            for (uint32_t r : item.rows) {
                double v = data.at(r, static_cast<size_t>(f));
                if (std::isnan(v))
                    (data.labels[r] ? missing_mal : missing_unk) += 1;
                else
                    scratch.emplace_back(v, data.labels[r]);
            }
            if (scratch.size() < 2) continue;
            std::sort(scratch.begin(), scratch.end());

            uint64_t left_mal = missing_mal, left_unk = missing_unk;
            const uint64_t total = item.rows.size();
            for (size_t i = 0; i + 1 < scratch.size(); ++i) {
                (scratch[i].second ? left_mal : left_unk) += 1;
                if (scratch[i].first == scratch[i + 1].first) continue;  // not a boundary
                uint64_t n_left = left_mal + left_unk;
                uint64_t n_right = total - n_left;
                if (n_left < static_cast<uint64_t>(config.min_leaf_size) ||
                    n_right < static_cast<uint64_t>(config.min_leaf_size))
                    continue;
                detail::SplitScore score{left_mal * left_mal + left_unk * left_unk, n_left,
                                         (mal - left_mal) * (mal - left_mal) +
                                             (unk - left_unk) * (unk - left_unk),
                                         n_right};
                if (!detail::improves(score, mal, unk)) continue;
                double threshold = scratch[i].first + (scratch[i + 1].first - scratch[i].first) / 2.0;
                if (!best.found || detail::compare_scores(score, best.score) > 0)
                    best = {true, f, threshold, score};
            }
        }

        if (!best.found) continue;  // no impurity-reducing split among candidates

        int left_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        int right_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        {
            TreeNode& node = tree.nodes[static_cast<size_t>(item.node)];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left = left_idx;
            node.right = right_idx;
        }

        std::vector<uint32_t> left_rows, right_rows;
        for (uint32_t r : item.rows) {
            double v = data.at(r, static_cast<size_t>(best.feature));
            (std::isnan(v) || v < best.threshold ? left_rows : right_rows).push_back(r);
        }
        stack.push_back({right_idx, std::move(right_rows), item.depth + 1});
        stack.push_back({left_idx, std::move(left_rows), item.depth + 1});
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Forest training, prediction, OOB evaluation
// ---------------------------------------------------------------------------

inline Verdict predict(const ForestModel& model, std::span<const double> row) {
    if (row.size() != model.feature_names.size())
        throw SchemaError("feature vector width " + std::to_string(row.size()) +
                          " does not match model schema " +
                          std::to_string(model.feature_names.size()));
    uint64_t mal_votes = 0;
    for (const auto& tree : model.trees) mal_votes += tree.vote(row);
    Verdict v;
    v.score = static_cast<double>(mal_votes) / static_cast<double>(model.n_trees());
    v.malicious = 2 * mal_votes >= model.n_trees();  // tie goes to malicious
    return v;
}

struct OobVote {
    uint32_t malicious = 0;
    uint32_t total = 0;
};

// Per-row vote counts using only trees that hold the row out-of-bag. When
// permuted_col >= 0, that column is read through the permutation row_perm.
inline std::vector<OobVote> oob_vote_counts(const ForestModel& model, const DataMatrix& data,
                                            int permuted_col = -1,
                                            const std::vector<uint32_t>* row_perm = nullptr) {
    std::vector<OobVote> votes(data.n_rows());
    const size_t d = data.n_features();
    std::vector<double> scratch(d);
    for (const auto& tree : model.trees) {
        for (uint32_t r : tree.oob) {
            std::span<const double> row(&data.values[r * d], d);
            if (permuted_col >= 0) {
                std::copy(row.begin(), row.end(), scratch.begin());
                scratch[static_cast<size_t>(permuted_col)] =
                    data.at((*row_perm)[r], static_cast<size_t>(permuted_col));
                votes[r].malicious += tree.vote(scratch);
                votes[r].total += 1;
            } else {
                votes[r].malicious += tree.vote(row);
                votes[r].total += 1;
            }
        }
    }
    return votes;
}

inline ConfusionMatrix confusion_from_votes(const std::vector<OobVote>& votes,
                                            const std::vector<uint8_t>& labels) {
    ConfusionMatrix cm;
    for (size_t r = 0; r < votes.size(); ++r) {
        if (votes[r].total == 0) {
            ++cm.excluded;
            continue;
        }
        uint8_t predicted = 2 * votes[r].malicious >= votes[r].total ? 1 : 0;
        cm.add(labels[r], predicted);
    }
    return cm;
}

// Majority vote over each row's out-of-bag trees; rows OOB in no tree are
// excluded and counted.
inline ConfusionMatrix oob_evaluate(const ForestModel& model, const DataMatrix& data) {
    return confusion_from_votes(oob_vote_counts(model, data), data.labels);
}

inline ForestModel train_forest(const DataMatrix& data, const TrainConfig& config, int threads = 1) {
    if (config.n_trees < 1) throw DataError("train_forest: n_trees must be >= 1");
    if (config.mtry < 1 || static_cast<size_t>(config.mtry) > data.n_features())
        throw DataError("train_forest: mtry must be in [1, n_features]");
    bool has_mal = false, has_unk = false;
    for (uint8_t l : data.labels) (l ? has_mal : has_unk) = true;
    if (!has_mal || !has_unk) throw DataError("train_forest: dataset has a single class");

    ForestModel model;
    model.config = config;
    model.feature_names = data.feature_names;
    model.trees.resize(static_cast<size_t>(config.n_trees));
    // per-tree streams derived from (seed, tree index): parallel-safe determinism
    parallel_for(static_cast<size_t>(config.n_trees), threads, [&](size_t t) {
        Rng rng(derive_stream(config.seed, t));
        model.trees[t] = train_tree(data, balanced_bootstrap(data.labels, config.balance, rng),
                                    config, rng);
    });
    model.oob_stats = oob_evaluate(model, data);
    return model;
}

struct MtryResult {
    int best_mtry = 0;
    std::vector<std::pair<int, double>> oob_errors;  // (mtry, oob error), grid order
};

// Trains one reduced forest per grid value, picks the smallest OOB error;
// ties go to the smaller mtry.
inline MtryResult tune_mtry(const DataMatrix& data, std::vector<int> grid,
                            const TrainConfig& config, int threads = 1) {
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty()) throw DataError("tune_mtry: empty grid");
    for (int g : grid)
        if (g < 1 || static_cast<size_t>(g) > data.n_features())
            throw DataError("tune_mtry: grid value " + std::to_string(g) + " out of range");
    MtryResult result;
    double best_err = 2.0;
    for (int g : grid) {
        TrainConfig c = config;
        c.mtry = g;
        ForestModel m = train_forest(data, c, threads);
        double err = m.oob_stats.error_rate();
        result.oob_errors.emplace_back(g, err);
        if (err < best_err) {  // grid ascending, so strict < keeps the smaller mtry on ties
            best_err = err;
            result.best_mtry = g;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Versioned JSON serialization (stable field order, byte-reproducible)
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json model_to_json(const ForestModel& model) {
    nlohmann::ordered_json j;
    j["version"] = kModelVersion;
    j["config"] = {{"n_trees", model.config.n_trees},
                   {"mtry", model.config.mtry},
                   {"min_leaf_size", model.config.min_leaf_size},
                   {"max_depth", model.config.max_depth},
                   {"seed", model.config.seed},
                   {"balance", model.config.balance}};
    j["missing_goes_left"] = true;
    j["feature_names"] = model.feature_names;
    j["oob_stats"] = {{"tp", model.oob_stats.tp},       {"fp", model.oob_stats.fp},
                      {"tn", model.oob_stats.tn},       {"fn", model.oob_stats.fn},
                      {"excluded", model.oob_stats.excluded}};
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : model.trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& n : tree.nodes)
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.n_malicious, n.n_unknown});
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j;
}

inline std::string serialize_model(const ForestModel& model) { return model_to_json(model).dump(); }

inline ForestModel parse_model(const std::string& content) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != kModelVersion)
            throw SchemaError("unsupported model version");
        ForestModel model;
        const auto& c = j.at("config");
        model.config.n_trees = c.at("n_trees").get<int>();
        model.config.mtry = c.at("mtry").get<int>();
        model.config.min_leaf_size = c.at("min_leaf_size").get<int>();
        model.config.max_depth = c.at("max_depth").get<int>();
        model.config.seed = c.at("seed").get<uint64_t>();
        model.config.balance = c.at("balance").get<bool>();
        model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        const auto& o = j.at("oob_stats");
        model.oob_stats.tp = o.at("tp").get<uint64_t>();
        model.oob_stats.fp = o.at("fp").get<uint64_t>();
        model.oob_stats.tn = o.at("tn").get<uint64_t>();
        model.oob_stats.fn = o.at("fn").get<uint64_t>();
        model.oob_stats.excluded = o.at("excluded").get<uint64_t>();
        for (const auto& jt : j.at("trees")) {
            DecisionTree tree;
            for (const auto& jn : jt.at("nodes")) {
                if (!jn.is_array() || jn.size() != 6) throw SchemaError("malformed tree node");
                TreeNode n;
                n.feature = jn.at(0).get<int>();
                n.threshold = jn.at(1).get<double>();
                n.left = jn.at(2).get<int>();
                n.right = jn.at(3).get<int>();
                n.n_malicious = jn.at(4).get<uint32_t>();
                n.n_unknown = jn.at(5).get<uint32_t>();
                tree.nodes.push_back(n);
            }
            if (tree.nodes.empty()) throw SchemaError("model tree with no nodes");
            model.trees.push_back(std::move(tree));
        }
        if (model.trees.size() != static_cast<size_t>(model.config.n_trees))
            throw SchemaError("model tree count does not match config");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed model file: ") + e.what());
    }
}

inline void save_model(const ForestModel& model, const std::string& path) {
    write_file_atomic(path, serialize_model(model));
}

inline ForestModel load_model(const std::string& path) { return parse_model(read_file(path)); }

}  // namespace botdet

#include "nodulecad/model_io.hpp"

#include <cmath>
#include <fstream>

namespace nodulecad::classifiers {

using nlohmann::json;

namespace {

json tree_to_json(const DecisionTree& tree, std::size_t id) {
    const TreeNode& n = tree.nodes()[id];
    if (n.is_leaf()) return json{{"label", n.label}, {"positive_fraction", n.positive_fraction}};
    return json{{"feature", n.feature},
                {"threshold", n.threshold},
                {"label", n.label},
                {"positive_fraction", n.positive_fraction},
                {"left", tree_to_json(tree, static_cast<std::size_t>(n.left))},
                {"right", tree_to_json(tree, static_cast<std::size_t>(n.right))}};
}

// Rebuilds nodes in the same pre-order the builder uses.
int tree_from_json(const json& j, std::vector<TreeNode>& nodes) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{});
    TreeNode node;
    node.label = j.at("label").get<int>();
    node.positive_fraction = j.at("positive_fraction").get<double>();
    if (j.contains("feature")) {
        node.feature = j.at("feature").get<int>();
        node.threshold = j.at("threshold").get<double>();
        node.left = tree_from_json(j.at("left"), nodes);
        node.right = tree_from_json(j.at("right"), nodes);
    }
    nodes[static_cast<std::size_t>(id)] = node;
    return id;
}

json trees_to_json(const std::vector<DecisionTree>& trees) {
    json arr = json::array();
    for (const auto& t : trees) arr.push_back(tree_to_json(t, 0));
    return arr;
}

std::vector<DecisionTree> trees_from_json(const json& arr) {
    std::vector<DecisionTree> out;
    for (const auto& t : arr) {
        std::vector<TreeNode> nodes;
        tree_from_json(t, nodes);
        out.emplace_back(std::move(nodes));
    }
    return out;
}

}  // namespace

json encode_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) throw ContractError("cannot encode NaN");
    return v;
}

double decode_real(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw InputError("expected a number, got string '" + s + "'");
    }
    if (!j.is_number()) throw InputError("expected a number");
    return j.get<double>();
}

json config_to_json(const ClassifierConfig& c) {
    json j{{"family", std::string(to_string(c.family))}};
    switch (c.family) {
        case Family::logreg:
        case Family::linsvm: j["C"] = c.C; break;
        case Family::knn: j["K"] = c.K; break;
        case Family::adaboost:
        case Family::rforest: j["D"] = c.D; j["N"] = c.N; break;
    }
    j["seed"] = c.seed;
    return j;
}

ClassifierConfig config_from_json(const json& j) {
    try {
        ClassifierConfig c = ClassifierConfig::defaults(parse_family(j.at("family").get<std::string>()));
        if (j.contains("C")) c.C = j.at("C").get<double>();
        if (j.contains("K")) c.K = j.at("K").get<int>();
        if (j.contains("D")) c.D = j.at("D").get<int>();
        if (j.contains("N")) c.N = j.at("N").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed classifier config: ") + e.what());
    }
}

json model_to_json(const TrainedClassifier& model) {
    json params = std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return json{{"weights", p.weights}, {"bias", p.bias}};
            } else if constexpr (std::is_same_v<T, KnnModel>) {
                json rows = json::array();
                for (std::size_t i = 0; i < p.points.rows(); ++i) {
                    const auto r = p.points.row(i);
                    rows.push_back(std::vector<double>(r.begin(), r.end()));
                }
                return json{{"k", p.k}, {"points", rows}, {"labels", p.labels}};
            } else if constexpr (std::is_same_v<T, BoostedModel>) {
                return json{{"alphas", p.alphas}, {"trees", trees_to_json(p.trees)}};
            } else {
                return json{{"trees", trees_to_json(p.trees)}};
            }
        },
        model.params());

    return json{{"schema", kModelSchemaVersion},
                {"family", std::string(to_string(model.family()))},
                {"hyperparameters", config_to_json(model.config())},
                {"threshold", encode_real(model.threshold())},
                {"standardizer",
                 {{"means", model.standardizer().means}, {"stds", model.standardizer().stds}}},
                {"parameters", params}};
}

TrainedClassifier model_from_json(const json& j) {
    if (!j.is_object() || !j.contains("schema"))
        throw ContractError("model document has no schema version");
    if (!j.at("schema").is_number_integer() || j.at("schema").get<int>() != kModelSchemaVersion)
        throw ContractError("unsupported model schema version " + j.at("schema").dump() +
                            " (this build reads version " + std::to_string(kModelSchemaVersion) +
                            ")");
    if (!j.contains("threshold")) throw ContractError("model document is missing the threshold");

    try {
        const ClassifierConfig cfg = config_from_json(j.at("hyperparameters"));
        if (j.at("family").get<std::string>() != to_string(cfg.family))
            throw InputError("model family does not match its hyperparameters");
        features::Standardizer s{j.at("standardizer").at("means").get<std::vector<double>>(),
                                 j.at("standardizer").at("stds").get<std::vector<double>>()};
        const json& p = j.at("parameters");

        ModelParams params;
        switch (cfg.family) {
            case Family::logreg:
            case Family::linsvm:
                params = LinearModel{p.at("weights").get<std::vector<double>>(),
                                     p.at("bias").get<double>()};
                break;
            case Family::knn: {
                KnnModel m;
                m.k = p.at("k").get<int>();
                for (const auto& row : p.at("points"))
                    m.points.append_row(row.get<std::vector<double>>());
                m.labels = p.at("labels").get<std::vector<int>>();
                if (m.labels.size() != m.points.rows() || m.k < 1 ||
                    static_cast<std::size_t>(m.k) > m.labels.size())
                    throw InputError("inconsistent K-NN parameters");
                params = std::move(m);
                break;
            }
            case Family::adaboost: {
                BoostedModel m{trees_from_json(p.at("trees")),
                               p.at("alphas").get<std::vector<double>>()};
                if (m.trees.size() != m.alphas.size())
                    throw InputError("AdaBoost tree and alpha counts differ");
                params = std::move(m);
                break;
            }
            case Family::rforest: {
                ForestModel m{trees_from_json(p.at("trees"))};
                if (m.trees.empty()) throw InputError("random forest has no trees");
                params = std::move(m);
                break;
            }
        }
        return TrainedClassifier(cfg, std::move(params), decode_real(j.at("threshold")),
                                 std::move(s));
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed model document: ") + e.what());
    }
}

void save_model(const TrainedClassifier& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write model file '" + path.string() + "'");
    out << model_to_json(model).dump(2) << '\n';
    if (!out) throw InputError("failed writing model file '" + path.string() + "'");
}

TrainedClassifier load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model file '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("model file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

}  // namespace nodulecad::classifiers

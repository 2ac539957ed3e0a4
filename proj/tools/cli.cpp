#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "nodulecad/data.hpp"
#include "nodulecad/eval.hpp"
#include "nodulecad/model_io.hpp"
#include "nodulecad/modelsel.hpp"
#include "nodulecad/synthetic.hpp"

namespace nodulecad::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using classifiers::ClassifierConfig;

// --- formatting and files ----------------------------------------------------

std::string format_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) throw ContractError("cannot format NaN");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_real(std::string_view text) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw InputError("not a number: '" + std::string(text) + "'");
    return v;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back(line);
        start = nl + 1;
    }
    return lines;
}

}  // namespace

FeatureTable FeatureTable::subset(std::span<const std::size_t> rows) const {
    FeatureTable t;
    t.columns = columns;
    t.features = Matrix(rows.size(), features.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        t.ids.push_back(ids[rows[k]]);
        t.labels.push_back(labels[rows[k]]);
        const auto src = features.row(rows[k]);
        std::copy(src.begin(), src.end(), t.features.row(k).begin());
    }
    return t;
}

std::string feature_csv(const FeatureTable& table) {
    std::string s = "id,label";
    for (const auto& c : table.columns) s += "," + c;
    s += "\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        s += table.ids[i] + "," + std::to_string(table.labels[i]);
        for (double v : table.features.row(i)) s += "," + format_real(v);
        s += "\n";
    }
    return s;
}

FeatureTable parse_feature_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw InputError("feature CSV is empty");
    const auto header = split_fields(lines[0]);
    if (header.size() < 3 || header[0] != "id" || header[1] != "label")
        throw InputError("feature CSV header must start with 'id,label'");

    FeatureTable t;
    for (std::size_t c = 2; c < header.size(); ++c) t.columns.emplace_back(header[c]);
    t.features = Matrix(0, t.columns.size());
    std::vector<double> row(t.columns.size());
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto fields = split_fields(lines[li]);
        if (fields.size() != header.size())
            throw InputError("feature CSV line " + std::to_string(li + 1) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(header.size()));
        t.ids.emplace_back(fields[0]);
        int label = 0;
        const auto res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), label);
        if (res.ec != std::errc{} || !is_valid_label(label))
            throw InputError("feature CSV line " + std::to_string(li + 1) +
                             ": label must be -1 or 1");
        t.labels.push_back(label);
        for (std::size_t c = 0; c < row.size(); ++c) {
            try {
                row[c] = parse_real(fields[c + 2]);
            } catch (const InputError& e) {
                throw InputError("feature CSV line " + std::to_string(li + 1) + ": " + e.what());
            }
            if (!std::isfinite(row[c]))
                throw InputError("feature CSV line " + std::to_string(li + 1) +
                                 ": non-finite feature");
        }
        t.features.append_row(row);
    }
    return t;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

FeatureTable read_feature_csv(const fs::path& path) {
    try {
        return parse_feature_csv(read_file(path));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp-" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw InputError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw InputError("cannot move output into place at '" + path.string() + "': " + ec.message());
    }
}

// --- grid documents ----------------------------------------------------------

std::vector<ClassifierConfig> parse_grid(const json& doc, std::uint64_t model_seed) {
    if (!doc.is_object() || doc.value("schema", 0) != 1)
        throw InputError("grid document must be an object with \"schema\": 1");
    if (!doc.contains("candidates") || !doc.at("candidates").is_array())
        throw InputError("grid document has no 'candidates' array");

    std::vector<ClassifierConfig> grid;
    for (const auto& spec : doc.at("candidates")) {
        try {
            std::vector<ClassifierConfig> partial{
                ClassifierConfig::defaults(classifiers::parse_family(spec.at("family").get<std::string>()))};
            partial.front().seed = model_seed;
            for (const char* key : {"C", "K", "D", "N"}) {
                if (!spec.contains(key)) continue;
                const json& v = spec.at(key);
                const json values = v.is_array() ? v : json::array({v});
                if (values.empty()) throw InputError(std::string("empty value list for ") + key);
                std::vector<ClassifierConfig> next;
                for (const auto& base : partial) {
                    for (const auto& x : values) {
                        ClassifierConfig c = base;
                        switch (key[0]) {
                            case 'C': c.C = x.get<double>(); break;
                            case 'K': c.K = x.get<int>(); break;
                            case 'D': c.D = x.get<int>(); break;
                            case 'N': c.N = x.get<int>(); break;
                        }
                        next.push_back(c);
                    }
                }
                partial = std::move(next);
            }
            for (auto& c : partial) {
                c.validate();
                grid.push_back(c);
            }
        } catch (const json::exception& e) {
            throw InputError(std::string("malformed grid candidate: ") + e.what());
        }
    }
    if (grid.empty()) throw InputError("grid document lists no candidates");
    return grid;
}

// --- subcommands ---------------------------------------------------------------

namespace {

struct Options {
    std::string manifest;
    std::string features;
    std::string model;
    std::string best;
    std::string grid;
    std::string family;
    std::string out;
    std::uint64_t seed = 42;
    std::string split_level = "slice";
    double train_fraction = 0.65;
    double margin = 0.05;
    int gray_bins = features::kGrayBins;
    int grad_bins = features::kGradientBins;
    int folds = 5;
    int n_benign = 150;
    int n_malignant = 150;
    int image_size = 64;
    unsigned threads = 0;
};

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw InputError(std::string("missing required option ") + flag);
}

void cmd_synth(const Options& o, std::ostream& out) {
    require(o.out, "--out");
    const auto nodules =
        data::generate_synthetic(o.n_benign, o.n_malignant, o.image_size, o.seed + kSynthSeedOffset);
    data::write_synthetic(nodules, o.out);
    out << "wrote " << nodules.size() << " synthetic nodules to " << o.out << "\n";
}

void cmd_extract(const Options& o, std::ostream& out) {
    require(o.manifest, "--manifest");
    require(o.out, "--out");
    const features::FeatureLayout layout{o.gray_bins, o.grad_bins};
    if (o.gray_bins < 1 || o.grad_bins < 1) throw InputError("bin counts must be positive");
    const data::Dataset ds = data::load_manifest(o.manifest);

    FeatureTable table;
    table.columns = layout.column_names();
    table.features = Matrix(0, layout.dimension());
    for (const auto& s : ds.samples) {
        const auto fv = data::extract_sample(ds.manifest, s, o.margin, layout);
        table.ids.push_back(s.entry.id);
        table.labels.push_back(s.label);
        table.features.append_row(fv.values);
    }
    write_file_atomic(o.out, feature_csv(table));
    out << "extracted " << table.size() << " nodules (" << ds.dropped_unknown
        << " with unknown diagnosis dropped) to " << o.out << "\n";
}

void cmd_split(const Options& o, std::ostream& out) {
    require(o.features, "--features");
    require(o.out, "--out");
    const FeatureTable table = read_feature_csv(o.features);
    const auto level = data::parse_split_level(o.split_level);

    std::vector<std::string> subjects = table.ids;
    if (level == data::SplitLevel::subject) {
        require(o.manifest, "--manifest (needed for subject-level splits)");
        const auto manifest = data::read_manifest(o.manifest);
        std::map<std::string, std::string> subject_of;
        for (const auto& e : manifest.entries) subject_of[e.id] = e.subject;
        for (auto& s : subjects) {
            const auto it = subject_of.find(s);
            if (it == subject_of.end())
                throw InputError("nodule '" + s + "' is not listed in the manifest");
            s = it->second;
        }
    }
    const auto split = data::split_train_test(table.labels, subjects, o.train_fraction,
                                              o.seed + kSplitSeedOffset, level);
    const fs::path dir(o.out);
    write_file_atomic(dir / "train.csv", feature_csv(table.subset(split.train)));
    write_file_atomic(dir / "test.csv", feature_csv(table.subset(split.test)));
    out << "split " << table.size() << " nodules: " << split.train.size() << " train, "
        << split.test.size() << " test\n";
}

json best_document(const modelsel::SearchResult& r, const Options& o) {
    const auto& row = r.table[r.best_index];
    return json{{"schema", 1},
                {"config", classifiers::config_to_json(r.best)},
                {"theta", classifiers::encode_real(r.best_theta)},
                {"cv",
                 {{"folds", o.folds},
                  {"mean_f", row.mean_f},
                  {"std_f", row.std_f},
                  {"pooled_f", row.pooled_f},
                  {"pooled_auc", row.pooled_auc}}}};
}

std::string cv_table_csv(const modelsel::SearchResult& r) {
    std::string s = "index,family,C,K,D,N,mean_f,std_f,pooled_f,pooled_auc,theta,selected\n";
    for (std::size_t i = 0; i < r.table.size(); ++i) {
        const auto& row = r.table[i];
        const auto& c = row.config;
        const bool linear = classifiers::is_linear(c.family);
        const bool trees = c.family == classifiers::Family::adaboost ||
                           c.family == classifiers::Family::rforest;
        s += std::to_string(i) + "," + std::string(classifiers::to_string(c.family)) + ",";
        s += (linear ? format_real(c.C) : "") + ",";
        s += (c.family == classifiers::Family::knn ? std::to_string(c.K) : "") + ",";
        s += (trees ? std::to_string(c.D) : "") + ",";
        s += (trees ? std::to_string(c.N) : "") + ",";
        s += format_real(row.mean_f) + "," + format_real(row.std_f) + "," +
             format_real(row.pooled_f) + "," + format_real(row.pooled_auc) + "," +
             format_real(row.theta) + "," + (i == r.best_index ? "1" : "0") + "\n";
    }
    return s;
}

json parse_json_file(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void cmd_tune(const Options& o, std::ostream& out) {
    require(o.features, "--features");
    require(o.out, "--out");
    const FeatureTable table = read_feature_csv(o.features);
    const std::uint64_t model_seed = o.seed + kModelSeedOffset;

    std::vector<ClassifierConfig> grid;
    if (!o.grid.empty()) {
        grid = parse_grid(parse_json_file(o.grid), model_seed);
    } else {
        require(o.family, "--family or --grid");
        grid = modelsel::default_grid(classifiers::parse_family(o.family), model_seed);
    }

    modelsel::SearchOptions so;
    so.folds = o.folds;
    so.seed = o.seed + kFoldSeedOffset;
    so.threads = o.threads;
    const auto result = modelsel::grid_search(grid, table.labeled(), so);

    const fs::path dir(o.out);
    write_file_atomic(dir / "cv_table.csv", cv_table_csv(result));
    write_file_atomic(dir / "best.json", best_document(result, o).dump(2) + "\n");
    out << "selected " << result.best.describe() << " with theta "
        << format_real(result.best_theta) << " (mean CV F "
        << format_real(result.table[result.best_index].mean_f) << ")\n";
}

void cmd_train(const Options& o, std::ostream& out) {
    require(o.features, "--features");
    require(o.best, "--best");
    require(o.out, "--out");
    const json best = parse_json_file(o.best);
    if (!best.is_object() || best.value("schema", 0) != 1)
        throw ContractError("best-config document has an unsupported schema version");
    if (!best.contains("config")) throw InputError("best-config document has no 'config'");
    if (!best.contains("theta") || best.at("theta").is_null())
        throw ContractError("best-config document is missing theta");
    const auto config = classifiers::config_from_json(best.at("config"));
    const double theta = classifiers::decode_real(best.at("theta"));

    const FeatureTable table = read_feature_csv(o.features);
    const auto model = modelsel::train_final(config, theta, table.labeled());
    write_file_atomic(o.out, classifiers::model_to_json(model).dump(2) + "\n");
    out << "trained " << config.describe() << " on " << table.size() << " nodules -> " << o.out
        << "\n";
}

struct Scored {
    FeatureTable table;
    classifiers::TrainedClassifier model;
    std::vector<double> scores;
    std::vector<int> predictions;
};

Scored score_table(const Options& o) {
    require(o.model, "--model");
    require(o.features, "--features");
    auto model = classifiers::load_model(o.model);
    FeatureTable table = read_feature_csv(o.features);
    if (table.features.cols() != model.dimension())
        throw ContractError("feature CSV has " + std::to_string(table.features.cols()) +
                            " features but the model expects " + std::to_string(model.dimension()));
    Scored s{std::move(table), std::move(model), {}, {}};
    for (std::size_t i = 0; i < s.table.size(); ++i) {
        const double v = classifiers::score_raw(s.model, s.table.features.row(i));
        s.scores.push_back(v);
        s.predictions.push_back(v >= s.model.threshold() ? kMalignant : kBenign);
    }
    return s;
}

void cmd_eval(const Options& o, std::ostream& out) {
    require(o.out, "--out");
    const Scored s = score_table(o);
    const auto c = eval::confusion(s.table.labels, s.predictions);
    const auto m = eval::metrics(c);
    const double area = eval::auc(eval::roc_curve(s.scores, s.table.labels));
    const json report{
        {"schema", 1},
        {"model", classifiers::config_to_json(s.model.config())},
        {"theta", classifiers::encode_real(s.model.threshold())},
        {"n", s.table.size()},
        {"confusion", {{"tp", c.tp}, {"fn", c.fn}, {"tn", c.tn}, {"fp", c.fp}}},
        {"metrics",
         {{"sensitivity", m.sensitivity},
          {"specificity", m.specificity},
          {"accuracy", m.accuracy},
          {"f_measure", m.f_measure}}},
        {"auc", area}};
    write_file_atomic(o.out, report.dump(2) + "\n");
    out << "AUC " << format_real(area) << "  Se " << format_real(m.sensitivity) << "  Sp "
        << format_real(m.specificity) << "  A " << format_real(m.accuracy) << "  F "
        << format_real(m.f_measure) << "\n";
}

void cmd_roc(const Options& o, std::ostream& out) {
    require(o.out, "--out");
    const Scored s = score_table(o);
    const auto roc = eval::roc_curve(s.scores, s.table.labels);
    std::string csv = "threshold,fpr,tpr\n";
    for (std::size_t i = 0; i < roc.points.size(); ++i)
        csv += format_real(roc.thresholds[i]) + "," + format_real(roc.points[i].fpr) + "," +
               format_real(roc.points[i].tpr) + "\n";
    const double area = eval::auc(roc);
    csv += "auc,," + format_real(area) + "\n";
    write_file_atomic(o.out, csv);
    out << "wrote " << roc.points.size() << " ROC points (AUC " << format_real(area) << ") to "
        << o.out << "\n";
}

void cmd_predict(const Options& o, std::ostream& out) {
    const Scored s = score_table(o);
    std::string csv = "id,score,label\n";
    for (std::size_t i = 0; i < s.table.size(); ++i)
        csv += s.table.ids[i] + "," + format_real(s.scores[i]) + "," +
               std::to_string(s.predictions[i]) + "\n";
    if (o.out.empty()) {
        out << csv;
    } else {
        write_file_atomic(o.out, csv);
        out << "wrote " << s.table.size() << " predictions to " << o.out << "\n";
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Benign/malignant lung nodule classification pipeline", "nodulecad"};
    app.require_subcommand(1);
    Options o;

    auto seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Base random seed")->capture_default_str(); };
    auto out_opt = [&](CLI::App* c, const char* what) { c->add_option("--out", o.out, what); };
    auto model_in = [&](CLI::App* c) {
        c->add_option("--model", o.model, "Trained model JSON");
        c->add_option("--features", o.features, "Feature CSV to score");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated dataset");
    out_opt(synth, "Output directory");
    seed(synth);
    synth->add_option("--benign", o.n_benign, "Number of benign nodules")->capture_default_str();
    synth->add_option("--malignant", o.n_malignant, "Number of malignant nodules")->capture_default_str();
    synth->add_option("--image-size", o.image_size, "Slice width and height in pixels")->capture_default_str();

    auto* extract = app.add_subcommand("extract", "Extract feature vectors from a manifest");
    extract->add_option("--manifest", o.manifest, "Dataset manifest JSON");
    out_opt(extract, "Output feature CSV");
    extract->add_option("--margin", o.margin, "ROI crop margin fraction")->capture_default_str();
    extract->add_option("--gray-bins", o.gray_bins, "Gray histogram bins")->capture_default_str();
    extract->add_option("--grad-bins", o.grad_bins, "Gradient histogram bins")->capture_default_str();

    auto* split = app.add_subcommand("split", "Split a feature CSV into train.csv and test.csv");
    split->add_option("--features", o.features, "Feature CSV");
    split->add_option("--manifest", o.manifest, "Manifest (subject ids, for --split-level subject)");
    out_opt(split, "Output directory");
    seed(split);
    split->add_option("--train-fraction", o.train_fraction, "Training share")->capture_default_str();
    split->add_option("--split-level", o.split_level, "slice or subject")->capture_default_str();

    auto* tune = app.add_subcommand("tune", "Cross-validated hyperparameter and threshold search");
    tune->add_option("--features", o.features, "Training feature CSV");
    tune->add_option("--family", o.family, "Classifier family for the default grid");
    tune->add_option("--grid", o.grid, "Grid description JSON");
    tune->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str();
    tune->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    out_opt(tune, "Output directory for cv_table.csv and best.json");
    seed(tune);

    auto* train = app.add_subcommand("train", "Retrain the selected configuration on all training data");
    train->add_option("--features", o.features, "Training feature CSV");
    train->add_option("--best", o.best, "best.json written by tune");
    out_opt(train, "Output model JSON");

    auto* evalc = app.add_subcommand("eval", "Evaluate a model on labeled features");
    model_in(evalc);
    out_opt(evalc, "Output report JSON");

    auto* roc = app.add_subcommand("roc", "Write the ROC curve of a model on labeled features");
    model_in(roc);
    out_opt(roc, "Output ROC CSV");

    auto* predict = app.add_subcommand("predict", "Score and label nodules");
    model_in(predict);
    out_opt(predict, "Output CSV (stdout when omitted)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    }

    try {
        if (*synth) cmd_synth(o, out);
        else if (*extract) cmd_extract(o, out);
        else if (*split) cmd_split(o, out);
        else if (*tune) cmd_tune(o, out);
        else if (*train) cmd_train(o, out);
        else if (*evalc) cmd_eval(o, out);
        else if (*roc) cmd_roc(o, out);
        else if (*predict) cmd_predict(o, out);
        return kSuccess;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kInputError;
    } catch (const ContractError& e) {
        err << "contract violation: " << e.what() << "\n";
        return kContractViolation;
    } catch (const fs::filesystem_error& e) {
        err << "input error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace nodulecad::cli

// Command-line front end: synth / extract / train / eval / predict.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 internal error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "gcnn/pipeline.hpp"
#include "gcnn/synth.hpp"

namespace fs = std::filesystem;
using namespace gcnn;

namespace {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed config line: " + line);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
        };
        trim(key);
        trim(val);
        kv[key] = val;
    }
    auto geti = [&](const std::string& key, int fallback) {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : std::stoi(it->second);
    };
    auto getf = [&](const std::string& key, double fallback) {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : std::stod(it->second);
    };
    cfg.model.num_blocks = geti("blocks", cfg.model.num_blocks);
    cfg.model.kernels = geti("kernels", cfg.model.kernels);
    cfg.model.kernel_width = geti("kernel_width", cfg.model.kernel_width);
    cfg.model.dense_units = geti("dense_units", cfg.model.dense_units);
    cfg.model.dropout_p = static_cast<float>(getf("dropout", cfg.model.dropout_p));
    cfg.train.epochs = geti("epochs", cfg.train.epochs);
    cfg.train.batch_size = geti("batch_size", cfg.train.batch_size);
    cfg.train.learning_rate =
        static_cast<float>(getf("learning_rate", cfg.train.learning_rate));
    if (cfg.model.num_blocks < 1 || cfg.model.kernels < 1 || cfg.model.dense_units < 1 ||
        cfg.train.epochs < 1 || cfg.train.batch_size < 1)
        throw ConfigError("model/train config values must be positive");
    return cfg;
}

void write_train_log(const std::string& path, const std::vector<EpochLogEntry>& log) {
    std::ofstream out(path);
    out << "epoch,batch,loss,seg_accuracy\n";
    char buf[96];
    for (const EpochLogEntry& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f\n", e.epoch, e.batch, e.loss,
                      e.seg_accuracy);
        out << buf;
    }
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Gated-convolution paralinguistic screening toolkit"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
    std::string synth_spec_path, synth_out, synth_preset = "binary";
    synth->add_option("--spec", synth_spec_path, "Key=value spec file");
    synth->add_option("--preset", synth_preset, "binary or 3class (when no --spec)")
        ->check(CLI::IsMember({"binary", "3class"}));
    synth->add_option("--out-dir", synth_out, "Output directory")->required();

    // ---- extract ----
    auto* extract = app.add_subcommand("extract", "Preprocess sessions into feature caches");
    std::string ex_manifest, ex_out;
    PreprocessConfig pre;
    double ex_target_dbfs = std::numeric_limits<double>::quiet_NaN();
    extract->add_option("--manifest", ex_manifest, "Session manifest (one record per line)")
        ->required();
    extract->add_option("--out-dir", ex_out, "Feature cache directory")->required();
    extract->add_option("--target-dbfs", ex_target_dbfs,
                        "Normalization target (default: dataset mean RMS dBFS)");
    extract->add_option("--segment-seconds", pre.segment_seconds, "Fixed segment length");
    extract->add_option("--subtract-alpha", pre.subtraction.over_subtraction,
                        "Spectral over-subtraction factor");
    extract->add_option("--subtract-beta", pre.subtraction.spectral_floor,
                        "Spectral floor factor");
    extract->add_flag("--allow-resample", pre.allow_resample,
                      "Resample unsupported rates to 16 kHz");

    // ---- train ----
    auto* train = app.add_subcommand("train", "Train the model for one CV fold");
    std::string tr_features, tr_config, tr_out, tr_condition = "dvh";
    int tr_fold = 0, tr_folds = 10;
    std::uint64_t tr_seed = 0;
    train->add_option("--features", tr_features, "Feature cache directory")->required();
    train->add_option("--config", tr_config, "Key=value model/train config file");
    train->add_option("--condition", tr_condition, "dvh|dvmh|dmvh|3class");
    train->add_option("--fold", tr_fold, "Held-out fold index")->required();
    train->add_option("--folds", tr_folds, "Total fold count");
    train->add_option("--seed", tr_seed, "Base RNG seed");
    train->add_option("--out", tr_out, "Output weight file")->required();

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Cross-validated evaluation report");
    std::string ev_features, ev_config, ev_out, ev_condition = "dvh";
    std::string ev_budgets = "4,8,20,40,60,300,all";
    int ev_folds = 10;
    std::uint64_t ev_seed = 0;
    eval->add_option("--features", ev_features, "Feature cache directory")->required();
    eval->add_option("--config", ev_config, "Key=value model/train config file");
    eval->add_option("--condition", ev_condition, "dvh|dvmh|dmvh|3class");
    eval->add_option("--budgets", ev_budgets, "Comma list of seconds, or 'all'");
    eval->add_option("--folds", ev_folds, "Fold count");
    eval->add_option("--seed", ev_seed, "Base RNG seed");
    eval->add_option("--out-dir", ev_out, "Report directory")->required();

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "Classify one session end to end");
    std::string pr_model, pr_wav, pr_interviewer;
    PreprocessConfig pr_pre;
    double pr_target_dbfs = -26.0;
    predict->add_option("--model", pr_model, "Weight file from train")->required();
    predict->add_option("--wav", pr_wav, "Patient-channel WAV")->required();
    predict->add_option("--interviewer", pr_interviewer, "Interviewer-channel WAV");
    predict->add_option("--target-dbfs", pr_target_dbfs, "Normalization target");
    predict->add_option("--segment-seconds", pr_pre.segment_seconds, "Fixed segment length");
    predict->add_option("--subtract-alpha", pr_pre.subtraction.over_subtraction,
                        "Spectral over-subtraction factor");
    predict->add_option("--subtract-beta", pr_pre.subtraction.spectral_floor,
                        "Spectral floor factor");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        SynthSpec spec;
        if (!synth_spec_path.empty()) {
            spec = load_synth_spec(synth_spec_path);
        } else {
            spec = synth_preset == "3class" ? default_three_class_spec() : default_binary_spec();
        }
        const auto records = synth_dataset(spec, synth_out);
        std::cout << "wrote " << records.size() << " sessions to " << synth_out << "\n";
        return 0;
    }

    if (extract->parsed()) {
        if (!std::isnan(ex_target_dbfs)) pre.target_dbfs = ex_target_dbfs;
        const auto manifest = load_manifest(ex_manifest);
        const ExtractResult res = run_extract(manifest, pre, ex_out);
        std::cout << "normalization target: " << res.target_dbfs_used << " dBFS\n";
        std::cout << "sessions ok: " << res.ok_sessions << ", failed: " << res.failed_sessions
                  << "\n";
        for (const std::string& e : res.errors) std::cerr << "error: " << e << "\n";
        const int total = res.ok_sessions + res.failed_sessions;
        if (total == 0 || res.failed_sessions * 10 > total) return 2;
        return 0;
    }

    if (train->parsed()) {
        const RunConfig cfg = load_run_config(tr_config);
        const auto sessions = load_eval_sessions(tr_features);
        const Condition condition = parse_condition(tr_condition);
        TrainConfig tcfg = cfg.train;
        tcfg.seed = tr_seed;
        const TrainFoldResult res = run_train_fold(sessions, condition, tr_fold, tr_folds,
                                                   tr_seed, cfg.model, tcfg, tr_out);
        write_train_log(tr_out + ".log.csv", res.log);
        std::ofstream audit(tr_out + ".audit.log");
        audit << "fold " << tr_fold << " train:";
        for (const std::string& s : res.train_speakers) audit << " " << s;
        audit << "\nfold " << tr_fold << " test:";
        for (const std::string& s : res.test_speakers) audit << " " << s;
        audit << "\n";
        std::cout << "wrote " << tr_out << " (" << res.train_speakers.size()
                  << " train / " << res.test_speakers.size() << " test speakers)\n";
        return 0;
    }

    if (eval->parsed()) {
        const RunConfig cfg = load_run_config(ev_config);
        const auto sessions = load_eval_sessions(ev_features);
        const Condition condition = parse_condition(ev_condition);
        TrainConfig tcfg = cfg.train;
        tcfg.seed = ev_seed;
        const CvReport report = evaluate_cv(sessions, cfg.model, tcfg, condition,
                                            parse_budgets(ev_budgets), ev_folds, ev_seed);
        write_report(report, ev_out);
        for (const BudgetMetrics& bm : report.budgets) {
            std::cout << "budget " << budget_name(bm.budget_s)
                      << ": mean acc " << bm.mean_accuracy << ", pooled acc "
                      << bm.pooled_accuracy << ", kappa " << bm.pooled_kappa << "\n";
        }
        std::cout << "report written to " << ev_out << "\n";
        return 0;
    }

    if (predict->parsed()) {
        pr_pre.target_dbfs = pr_target_dbfs;
        const AudioClip patient = read_wav(pr_wav);
        AudioClip interviewer;
        const bool has_interviewer = !pr_interviewer.empty();
        if (has_interviewer) interviewer = read_wav(pr_interviewer);
        const PredictResult res =
            run_predict(pr_model, patient, has_interviewer ? &interviewer : nullptr, pr_pre);
        std::cout << "session label: " << res.session.label << "\nsession probabilities:";
        for (float p : res.session.probabilities) std::cout << " " << p;
        std::cout << "\n";
        for (std::size_t i = 0; i < res.segments.size(); ++i) {
            std::cout << "segment " << i << ": label " << res.segments[i].label << " probs";
            for (float p : res.segments[i].probabilities) std::cout << " " << p;
            std::cout << "\n";
        }
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}

#include "gcnn/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gcnn/parallel.hpp"
#include "gcnn/synth.hpp"

namespace gcnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

AudioClip load_session_audio(const ManifestRecord& rec, const PreprocessConfig& cfg) {
    AudioClip patient = read_wav(rec.patient_wav);
    if (patient.sample_rate != 16000 && patient.sample_rate != 44100) {
        if (!cfg.allow_resample)
            throw UnsupportedFormatError(rec.patient_wav + ": unsupported sample rate " +
                                         std::to_string(patient.sample_rate));
        patient = resample(patient, 16000);
    }
    if (rec.interviewer_wav) {
        AudioClip interviewer = read_wav(*rec.interviewer_wav);
        if (interviewer.sample_rate != patient.sample_rate && cfg.allow_resample)
            interviewer = resample(interviewer, patient.sample_rate);
        patient = cross_channel_spectral_subtraction(patient, interviewer, cfg.subtraction);
    }
    return patient;
}

struct SessionSegments {
    std::vector<AudioClip> clips;
    std::vector<double> starts;
};

SessionSegments segment_session(const AudioClip& normalized, const ManifestRecord& rec,
                                const PreprocessConfig& cfg) {
    SessionSegments out;
    if (rec.turns_path) {
        const std::vector<TurnSpan> turns = load_turns(*rec.turns_path);
        out.clips = extract_turn_utterances(normalized, turns);
        for (const TurnSpan& t : turns) out.starts.push_back(std::max(0.0, t.start_s - 0.010));
    } else {
        out.clips = segment_fixed(normalized, cfg.segment_seconds);
        for (std::size_t i = 0; i < out.clips.size(); ++i)
            out.starts.push_back(static_cast<double>(i) * cfg.segment_seconds);
    }
    return out;
}

}  // namespace

ExtractResult run_extract(const std::vector<ManifestRecord>& manifest,
                          const PreprocessConfig& cfg, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    const int n = static_cast<int>(manifest.size());
    ExtractResult result;

    // Pass 1: dataset-mean RMS dBFS unless overridden.
    double target = cfg.target_dbfs.value_or(0.0);
    if (!cfg.target_dbfs) {
        std::vector<double> levels(static_cast<std::size_t>(n),
                                   std::numeric_limits<double>::quiet_NaN());
        parallel_for(n, [&](int i) {
            try {
                const AudioClip clip = load_session_audio(manifest[static_cast<std::size_t>(i)], cfg);
                levels[static_cast<std::size_t>(i)] = rms_dbfs(clip);
            } catch (const Error&) {
                // reported in pass 2
            }
        });
        double sum = 0.0;
        int count = 0;
        for (double v : levels) {
            if (std::isfinite(v) && v > -200.0) {
                sum += v;
                ++count;
            }
        }
        target = count > 0 ? sum / count : -26.0;
    }
    result.target_dbfs_used = target;

    struct SessionIndex {
        bool ok = false;
        std::string error;
        json entry;
    };
    std::vector<SessionIndex> index(static_cast<std::size_t>(n));

    parallel_for(n, [&](int i) {
        const ManifestRecord& rec = manifest[static_cast<std::size_t>(i)];
        SessionIndex& si = index[static_cast<std::size_t>(i)];
        try {
            AudioClip clip = load_session_audio(rec, cfg);
            clip = normalize_dbfs(clip, target);
            const SessionSegments segs = segment_session(clip, rec, cfg);
            if (segs.clips.empty()) throw EmptyInputError("session produced no segments");

            json entry;
            entry["session_id"] = rec.session_id;
            entry["speaker_id"] = rec.speaker_id;
            if (rec.mmse) entry["mmse"] = *rec.mmse;
            entry["label"] = class_name(rec.resolved_label());
            json seg_list = json::array();
            for (std::size_t s = 0; s < segs.clips.size(); ++s) {
                const FeatureMatrix feats = extract_features(segs.clips[s], cfg.frames);
                std::ostringstream name;
                name << rec.session_id << "_" << std::setw(4) << std::setfill('0') << s
                     << ".lldc";
                const std::string path = (fs::path(out_dir) / name.str()).string();
                write_feature_cache(path, feats);
                json seg;
                seg["path"] = path;
                seg["start_s"] = segs.starts[s];
                seg["duration_s"] = segs.clips[s].duration_s();
                seg_list.push_back(std::move(seg));
            }
            entry["segments"] = std::move(seg_list);
            si.entry = std::move(entry);
            si.ok = true;
        } catch (const std::exception& e) {
            si.error = rec.session_id + ": " + e.what();
        }
    });

    std::ofstream idx_out(fs::path(out_dir) / "index.jsonl");
    if (!idx_out) throw IoError("cannot write feature index");
    for (const SessionIndex& si : index) {
        if (si.ok) {
            idx_out << si.entry.dump() << "\n";
            ++result.ok_sessions;
        } else {
            ++result.failed_sessions;
            result.errors.push_back(si.error);
        }
    }
    return result;
}

std::vector<EvalSession> load_eval_sessions(const std::string& features_dir) {
    const std::string index_path = (fs::path(features_dir) / "index.jsonl").string();
    std::ifstream in(index_path);
    if (!in) throw NotFoundError("cannot open feature index: " + index_path);

    struct Entry {
        json j;
    };
    std::vector<json> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        entries.push_back(json::parse(line));
    }
    if (entries.empty()) throw EmptyInputError("feature index is empty");

    std::vector<EvalSession> sessions(entries.size());
    parallel_for(static_cast<int>(entries.size()), [&](int i) {
        const json& j = entries[static_cast<std::size_t>(i)];
        EvalSession s;
        s.session_id = j.at("session_id").get<std::string>();
        s.speaker_id = j.at("speaker_id").get<std::string>();
        s.label = parse_class_label(j.at("label").get<std::string>());
        if (j.contains("mmse")) s.mmse = j["mmse"].get<int>();
        for (const json& seg : j.at("segments")) {
            SegmentFeature sf;
            sf.features = read_feature_cache(seg.at("path").get<std::string>());
            sf.start_s = seg.at("start_s").get<double>();
            sf.duration_s = seg.at("duration_s").get<double>();
            s.segments.push_back(std::move(sf));
        }
        sessions[static_cast<std::size_t>(i)] = std::move(s);
    });
    return sessions;
}

TrainFoldResult run_train_fold(const std::vector<EvalSession>& sessions, Condition condition,
                               int fold, int k, std::uint64_t fold_plan_seed,
                               const ModelConfig& mcfg_in, const TrainConfig& tcfg,
                               const std::string& model_out) {
    ModelConfig mcfg = mcfg_in;
    mcfg.classes = condition_class_count(condition);

    std::vector<std::pair<std::string, ClassLabel>> speaker_labels;
    for (const EvalSession& s : sessions)
        if (condition_relabel(s.label, condition)) speaker_labels.emplace_back(s.speaker_id, s.label);
    const FoldPlan plan = plan_folds(speaker_labels, k, fold_plan_seed);

    TrainFoldResult result;
    std::set<std::string> train_speakers, test_speakers;
    std::vector<TrainSegment> train;
    std::vector<const FeatureMatrix*> train_mats;
    for (const EvalSession& s : sessions) {
        const auto relabeled = condition_relabel(s.label, condition);
        if (!relabeled) continue;
        if (plan.assignment.at(s.speaker_id) == fold) {
            test_speakers.insert(s.speaker_id);
            continue;
        }
        train_speakers.insert(s.speaker_id);
        for (const SegmentFeature& seg : s.segments) {
            train.push_back({&seg.features, *relabeled});
            train_mats.push_back(&seg.features);
        }
    }
    if (train.empty()) throw EmptyInputError("training set for fold is empty");

    const RowStats stats = compute_fold_stats(train_mats);
    TrainConfig fold_cfg = tcfg;
    fold_cfg.seed = tcfg.seed + static_cast<std::uint64_t>(fold);
    nn::Model<float> model = train_fold(train, mcfg, fold_cfg, stats, &result.log);
    save_model(model_out, model, &stats);

    result.train_speakers.assign(train_speakers.begin(), train_speakers.end());
    result.test_speakers.assign(test_speakers.begin(), test_speakers.end());
    return result;
}

std::vector<double> parse_budgets(const std::string& list) {
    std::vector<double> budgets;
    std::istringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item == "all" || item == "inf") {
            budgets.push_back(kBudgetAll);
        } else {
            budgets.push_back(std::stod(item));
        }
    }
    if (budgets.empty()) throw ConfigError("empty budget list");
    return budgets;
}

std::string budget_name(double budget_s) {
    if (std::isinf(budget_s) || budget_s <= 0.0) return "all";
    std::ostringstream ss;
    ss << budget_s;
    return ss.str();
}

void write_report(const CvReport& report, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create report directory: " + out_dir);

    {
        std::ofstream metrics(fs::path(out_dir) / "metrics.csv");
        metrics << "condition,budget_s,fold,sessions,accuracy,mean_accuracy,pooled_accuracy,"
                   "pooled_kappa,auc\n";
        metrics << std::fixed << std::setprecision(6);
        for (const BudgetMetrics& bm : report.budgets) {
            for (std::size_t f = 0; f < bm.fold_accuracy.size(); ++f) {
                long long count = 0;
                for (const auto& row : bm.fold_cm[f])
                    for (long long v : row) count += v;
                metrics << condition_name(report.condition) << "," << budget_name(bm.budget_s)
                        << "," << f << "," << count << "," << bm.fold_accuracy[f] << ","
                        << bm.mean_accuracy << "," << bm.pooled_accuracy << ","
                        << bm.pooled_kappa << "," << bm.roc.auc << "\n";
            }
        }
    }
    {
        std::ofstream roc(fs::path(out_dir) / "roc.csv");
        roc << "budget_s,threshold,fpr,tpr\n" << std::fixed << std::setprecision(6);
        std::ofstream det(fs::path(out_dir) / "det.csv");
        det << "budget_s,threshold,fpr,fnr\n" << std::fixed << std::setprecision(6);
        for (const BudgetMetrics& bm : report.budgets) {
            for (const RocPoint& p : bm.roc.points)
                roc << budget_name(bm.budget_s) << "," << p.threshold << "," << p.fpr << ","
                    << p.tpr << "\n";
            for (const DetPoint& p : bm.det)
                det << budget_name(bm.budget_s) << "," << p.threshold << "," << p.fpr << ","
                    << p.fnr << "\n";
        }
    }
    {
        std::ofstream cmf(fs::path(out_dir) / "confusion.csv");
        cmf << "scope,budget_s,actual,predicted,count\n";
        auto dump_cm = [&](const std::string& scope, const std::string& budget,
                           const Confusion& cm) {
            for (std::size_t a = 0; a < cm.size(); ++a)
                for (std::size_t p = 0; p < cm[a].size(); ++p)
                    cmf << scope << "," << budget << "," << a << "," << p << "," << cm[a][p]
                        << "\n";
        };
        if (!report.pooled_segment_cm.empty())
            dump_cm("segment", "all", report.pooled_segment_cm);
        for (const BudgetMetrics& bm : report.budgets)
            if (!bm.pooled_cm.empty())
                dump_cm("session", budget_name(bm.budget_s), bm.pooled_cm);
    }
    {
        std::ofstream audit(fs::path(out_dir) / "audit.log");
        audit << "condition=" << condition_name(report.condition) << " k=" << report.plan.k
              << "\n";
        for (std::size_t f = 0; f < report.fold_speakers.size(); ++f) {
            audit << "fold " << f << " train:";
            for (const std::string& s : report.fold_speakers[f].first) audit << " " << s;
            audit << "\nfold " << f << " test:";
            for (const std::string& s : report.fold_speakers[f].second) audit << " " << s;
            audit << "\n";
        }
    }
    {
        std::ofstream summary(fs::path(out_dir) / "summary.txt");
        summary << "condition: " << condition_name(report.condition) << "\n";
        summary << std::fixed << std::setprecision(4);
        summary << "segment-level pooled accuracy: " << report.pooled_segment_accuracy << "\n\n";
        summary << "budget_s   mean_acc   pooled_acc   kappa      auc\n";
        for (const BudgetMetrics& bm : report.budgets) {
            summary << std::setw(8) << budget_name(bm.budget_s) << "   " << bm.mean_accuracy
                    << "     " << bm.pooled_accuracy << "       " << bm.pooled_kappa << "   "
                    << bm.roc.auc << "\n";
        }
    }
}

PredictResult run_predict(const std::string& model_path, const AudioClip& patient,
                          const AudioClip* interviewer, const PreprocessConfig& cfg) {
    LoadedModel lm = load_model(model_path);
    if (!lm.stats) throw ConfigError("model file carries no feature statistics");

    AudioClip clip = patient;
    if (interviewer)
        clip = cross_channel_spectral_subtraction(clip, *interviewer, cfg.subtraction);
    clip = normalize_dbfs(clip, cfg.target_dbfs.value_or(-26.0));
    std::vector<AudioClip> segments = segment_fixed(clip, cfg.segment_seconds);
    if (segments.empty() && !clip.samples.empty()) segments.push_back(clip);
    if (segments.empty()) throw EmptyInputError("no audio to classify");

    PredictResult result;
    const int classes = lm.model.config().classes;
    for (const AudioClip& seg : segments) {
        const FeatureMatrix raw = extract_features(seg, cfg.frames);
        const FeatureMatrix m =
            assemble_feature_matrix(raw, lm.model.config().input_frames, &*lm.stats);
        result.segments.push_back(predict_segment(lm.model, m));
    }
    result.session.label = majority_vote(result.segments, classes);
    result.session.probabilities.assign(static_cast<std::size_t>(classes), 0.0f);
    for (const Prediction& p : result.segments)
        for (int c = 0; c < classes; ++c)
            result.session.probabilities[static_cast<std::size_t>(c)] +=
                p.probabilities[static_cast<std::size_t>(c)] /
                static_cast<float>(result.segments.size());
    return result;
}

}  // namespace gcnn

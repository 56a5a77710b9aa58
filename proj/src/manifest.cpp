#include "gcnn/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gcnn {

using nlohmann::json;

ClassLabel ManifestRecord::resolved_label() const {
    if (class_label) return *class_label;
    if (mmse) return map_mmse_to_class(*mmse);
    throw ConfigError("session " + session_id + " has neither mmse nor class_label");
}

std::vector<ManifestRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open manifest: " + path);
    std::vector<ManifestRecord> records;
    std::set<std::string> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        ManifestRecord r;
        r.session_id = j.at("session_id").get<std::string>();
        r.speaker_id = j.at("speaker_id").get<std::string>();
        r.patient_wav = j.at("wav").get<std::string>();
        if (j.contains("interviewer_wav")) r.interviewer_wav = j["interviewer_wav"].get<std::string>();
        if (j.contains("mmse")) r.mmse = j["mmse"].get<int>();
        if (j.contains("label")) r.class_label = parse_class_label(j["label"].get<std::string>());
        if (j.contains("turns")) r.turns_path = j["turns"].get<std::string>();
        if (j.contains("dataset")) r.dataset = j["dataset"].get<std::string>();
        if (!r.mmse && !r.class_label)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": record needs mmse or label");
        if (!ids.insert(r.session_id).second)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": duplicate session_id " + r.session_id);
        records.push_back(std::move(r));
    }
    if (records.empty()) throw EmptyInputError("manifest is empty: " + path);
    return records;
}

void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    for (const ManifestRecord& r : records) {
        json j;
        j["session_id"] = r.session_id;
        j["speaker_id"] = r.speaker_id;
        j["wav"] = r.patient_wav;
        if (r.interviewer_wav) j["interviewer_wav"] = *r.interviewer_wav;
        if (r.mmse) j["mmse"] = *r.mmse;
        if (r.class_label) j["label"] = class_name(*r.class_label);
        if (r.turns_path) j["turns"] = *r.turns_path;
        if (!r.dataset.empty()) j["dataset"] = r.dataset;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("short write: " + path);
}

std::vector<TurnSpan> load_turns(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open turns file: " + path);
    std::vector<TurnSpan> turns;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        TurnSpan t;
        if (!(ls >> t.start_s >> t.end_s))
            throw ConfigError("malformed turns line in " + path + ": " + line);
        turns.push_back(t);
    }
    return turns;
}

void save_turns(const std::string& path, const std::vector<TurnSpan>& turns) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write turns file: " + path);
    for (const TurnSpan& t : turns) out << t.start_s << " " << t.end_s << "\n";
}

}  // namespace gcnn

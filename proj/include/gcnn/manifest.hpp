#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gcnn/audio.hpp"
#include "gcnn/eval.hpp"

namespace gcnn {

/// One clinical session as listed in a manifest file.
struct ManifestRecord {
    std::string session_id;
    std::string speaker_id;
    std::string patient_wav;
    std::optional<std::string> interviewer_wav;
    std::optional<int> mmse;
    std::optional<ClassLabel> class_label;
    std::optional<std::string> turns_path;
    std::string dataset;

    /// Explicit label when present, otherwise derived from MMSE.
    ClassLabel resolved_label() const;
};

/// Manifest: one JSON object per line. Validates unique session ids and
/// that each record carries mmse and/or class_label.
std::vector<ManifestRecord> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

/// Turns file: one "start_s end_s" pair per line; '#' comments allowed.
std::vector<TurnSpan> load_turns(const std::string& path);
void save_turns(const std::string& path, const std::vector<TurnSpan>& turns);

}  // namespace gcnn

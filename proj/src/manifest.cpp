#include <set>
#include <tuple>

#include "neurofuse/io.hpp"

namespace neurofuse::io {

std::string trial_stem(int participant, int session, int trial) {
  return std::to_string(participant) + "_" + std::to_string(session) + "_" + std::to_string(trial);
}

void Manifest::validate(bool check_files) const {
  if (format_version != kFormatVersion) {
    throw ValidationError("unsupported manifest version " + std::to_string(format_version));
  }
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& e : trials) {
    if (!seen.emplace(e.participant, e.session, e.trial).second) {
      throw ValidationError("duplicate trial " + trial_stem(e.participant, e.session, e.trial));
    }
    if (check_files) {
      for (const fs::path& p : {raw_file(e), eye_file(e)}) {
        if (!fs::exists(p)) throw IoError("manifest references missing file " + p.string());
      }
    }
  }
}

void Manifest::save() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : trials) {
    list.push_back({{"participant", e.participant},
                    {"session", e.session},
                    {"trial", e.trial},
                    {"label", e.label.code()},
                    {"label_name", e.label.name()},
                    {"sampling_rate", e.sampling_rate},
                    {"raw_path", e.raw_path},
                    {"eye_path", e.eye_path}});
  }
  nlohmann::json j{{"format_version", format_version}, {"root", "."}, {"trials", list},
                   {"provenance", provenance}};
  write_json(root / kFileName, j);
}

Manifest Manifest::load(const fs::path& path, bool check_files) {
  const fs::path file = fs::is_directory(path) ? path / kFileName : path;
  const nlohmann::json j = read_json(file);
  Manifest m;
  m.root = file.parent_path();
  try {
    m.format_version = j.at("format_version").get<int>();
    if (j.contains("provenance")) m.provenance = j.at("provenance");
    for (const auto& t : j.at("trials")) {
      ManifestEntry e;
      e.participant = t.at("participant").get<int>();
      e.session = t.at("session").get<int>();
      e.trial = t.at("trial").get<int>();
      e.label = EmotionLabel::from_code(t.at("label").get<int>());
      e.sampling_rate = t.value("sampling_rate", 1000.0);
      e.raw_path = t.at("raw_path").get<std::string>();
      e.eye_path = t.at("eye_path").get<std::string>();
      m.trials.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(file.string() + ": malformed manifest: " + e.what());
  }
  m.validate(check_files);
  return m;
}

}  // namespace neurofuse::io

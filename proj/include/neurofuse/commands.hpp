#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "neurofuse/checkpoint.hpp"
#include "neurofuse/eval.hpp"
#include "neurofuse/fusion.hpp"
#include "neurofuse/synthgen.hpp"

namespace neurofuse::cli {

namespace fs = std::filesystem;

/// Named settings bundles: "paper-shape" (16 participants, 72 s trials,
/// W=200, H=50), "small" (4 participants), "tiny" (1 participant, 1
/// session, 8 s trials; for smoke runs).
void apply_preset(std::string_view name, PipelineConfig& cfg, synth::SynthSpec& spec);

/// Extraction and fusion of one trial held in memory.
FeatureMatrix trial_features(const RawTrial& raw, const FeatureMatrix& eye, const PipelineConfig& cfg);

/// Generates, extracts and fuses a corpus without touching the disk.
/// `progress(done, total)` is called after every trial.
fusion::Corpus synthesize_corpus(const synth::SynthSpec& spec, const PipelineConfig& cfg,
                                 const std::function<void(std::size_t, std::size_t)>& progress = {});

io::Manifest cmd_synth(const synth::SynthSpec& spec, const fs::path& out, std::ostream& log);

struct ExtractSummary {
  std::size_t written = 0;  // trials with both feature files
  std::vector<std::string> failures;
  int exit_code = 0;  // worst per-trial error code, 0 when all succeeded
};

/// Writes `<p>_<s>_<t>_FFT.npy` and `<p>_<s>_<t>_DE.npy` per manifest trial.
/// Per-trial failures are collected and do not stop the run.
ExtractSummary cmd_extract(const fs::path& corpus, const fs::path& out, const PipelineConfig& cfg,
                           std::ostream& log);

struct DatasetInfo {
  Index rows = 0;
  Index cols = 0;
  Index trials = 0;
};

/// Writes data.npy (rows x 739), labels.npy (rows x 5 one-hot), trials.npy
/// (source trial of each row, '<i8') and dataset.json into `out`.
DatasetInfo cmd_fuse(const fs::path& corpus, const fs::path& features, const fs::path& out, std::ostream& log);

fusion::Corpus load_dataset(const fs::path& dir);

/// Writes model.ckpt and history.json; returns the checkpoint metadata.
nlohmann::json cmd_train(const fs::path& dataset, const fs::path& out, const PipelineConfig& cfg,
                         std::ostream& log);

/// Scores a checkpoint on its test split. The split is rebuilt from the
/// configuration stored in the checkpoint, with `overrides` (config keys)
/// merged on top. Writes report.json, report.txt and confusion.csv.
eval::EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& dataset, const fs::path& out,
                          const nlohmann::json& overrides, std::ostream& log);

/// Window-mode vs trial-mode training on the same data; writes probe.json
/// and probe.txt.
eval::ProbeReport cmd_probe(const fs::path& dataset, const fs::path& out, const PipelineConfig& cfg,
                            std::ostream& log);

/// synth -> extract -> fuse -> train -> eval under `out`, plus summary.json.
nlohmann::json cmd_pipeline(const synth::SynthSpec& spec, const PipelineConfig& cfg, const fs::path& out,
                            std::ostream& log);

}  // namespace neurofuse::cli

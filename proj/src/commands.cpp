#include "neurofuse/commands.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "neurofuse/dsp.hpp"
#include "neurofuse/io.hpp"

namespace neurofuse::cli {

namespace {

nlohmann::json history_json(const std::vector<nn::EpochStats>& history) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : history) {
    out.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"train_accuracy", e.train_accuracy}});
  }
  return out;
}

nlohmann::json shape(Index rows, Index cols) { return nlohmann::json::array({rows, cols}); }

std::function<void(const nn::EpochStats&)> epoch_logger(std::ostream& log, std::string prefix) {
  return [&log, prefix = std::move(prefix)](const nn::EpochStats& e) {
    log << prefix << "epoch " << e.epoch << ": loss " << std::setprecision(6) << e.mean_loss << ", train accuracy "
        << e.train_accuracy << "\n";
  };
}

nn::Architecture architecture_for(Index width) {
  nn::Architecture arch;
  arch.input_len = width;
  arch.validate();
  return arch;
}

FeatureMatrix load_feature(const fs::path& path, FeatureKind kind) {
  FeatureMatrix m;
  m.kind = kind;
  m.data = io::read_npy_matrix(path);
  return m;
}

}  // namespace

void apply_preset(std::string_view name, PipelineConfig& cfg, synth::SynthSpec& spec) {
  if (name == "paper-shape" || name == "small" || name == "tiny") {
    cfg.window_len = 200;
    cfg.hop = 50;
    spec.trial_seconds = 72.0;
    spec.n_sessions = 3;
    spec.trials_per_session = 15;
    spec.n_participants = name == "paper-shape" ? 16 : 4;
    if (name == "tiny") {
      spec.n_participants = 1;
      spec.n_sessions = 1;
      spec.trial_seconds = 8.0;
    }
    return;
  }
  throw ValidationError("unknown preset '" + std::string(name) + "' (expected paper-shape, small or tiny)");
}

FeatureMatrix trial_features(const RawTrial& raw, const FeatureMatrix& eye, const PipelineConfig& cfg) {
  return fusion::align_and_fuse(dsp::extract_power_spectrum(raw, cfg), eye, dsp::extract_de(raw, cfg));
}

fusion::Corpus synthesize_corpus(const synth::SynthSpec& spec, const PipelineConfig& cfg,
                                 const std::function<void(std::size_t, std::size_t)>& progress) {
  cfg.validate();
  const auto plans = synth::plan_corpus(spec);
  const Index per_trial = static_cast<Index>(
      dsp::window_count(static_cast<std::size_t>(spec.samples_per_trial()), cfg.window_len, cfg.hop));
  const Index width = kRawChannels * static_cast<Index>(cfg.band_edges.n_bands()) +
                      kDeChannels * static_cast<Index>(cfg.de_bands.n_bands()) + kEyeFeatures;
  fusion::CorpusBuilder builder(per_trial * static_cast<Index>(plans.size()), width);

  const std::size_t chunk = std::max<std::size_t>(1, worker_count());
  std::vector<FeatureMatrix> fused(chunk);
  for (std::size_t begin = 0; begin < plans.size(); begin += chunk) {
    const std::size_t n = std::min(chunk, plans.size() - begin);
    parallel_for(n, [&](std::size_t i) {
      const synth::SynthTrial t = synth::generate_planned(plans[begin + i], spec);
      fused[i] = trial_features(t.raw, t.eye, cfg);
    });
    for (std::size_t i = 0; i < n; ++i) {
      builder.append(fused[i], plans[begin + i].label);
      fused[i] = FeatureMatrix{};
      if (progress) progress(begin + i + 1, plans.size());
    }
  }
  return std::move(builder).finish();
}

io::Manifest cmd_synth(const synth::SynthSpec& spec, const fs::path& out, std::ostream& log) {
  io::Manifest m = synth::generate_corpus(spec, out);
  log << "wrote " << 2 * m.trials.size() << " files for " << m.trials.size() << " trials; manifest "
      << (out / io::Manifest::kFileName).string() << "\n";
  return m;
}

ExtractSummary cmd_extract(const fs::path& corpus, const fs::path& out, const PipelineConfig& cfg,
                           std::ostream& log) {
  cfg.validate();
  const io::Manifest manifest = io::Manifest::load(corpus, false);
  std::vector<std::string> errors(manifest.trials.size());
  std::vector<int> codes(manifest.trials.size(), 0);
  parallel_for(manifest.trials.size(), [&](std::size_t i) {
    const io::ManifestEntry& e = manifest.trials[i];
    try {
      RawTrial raw;
      raw.participant = e.participant;
      raw.session = e.session;
      raw.trial_index = e.trial;
      raw.label = e.label;
      raw.sampling_rate = e.sampling_rate;
      raw.samples = io::read_npy_matrix(manifest.raw_file(e));
      raw.validate();
      const std::string stem = io::trial_stem(e.participant, e.session, e.trial);
      io::write_npy(out / (stem + "_FFT.npy"), dsp::extract_power_spectrum(raw, cfg).data);
      io::write_npy(out / (stem + "_DE.npy"), dsp::extract_de(raw, cfg).data);
    } catch (const Error& err) {
      errors[i] = err.what();
      codes[i] = err.exit_code();
    }
  });
  ExtractSummary summary;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (codes[i] == 0) {
      ++summary.written;
      continue;
    }
    const auto& e = manifest.trials[i];
    summary.failures.push_back(io::trial_stem(e.participant, e.session, e.trial) + ": " + errors[i]);
    log << "trial " << summary.failures.back() << "\n";
    summary.exit_code = std::max(summary.exit_code, codes[i]);
  }
  log << "extracted " << summary.written << " of " << manifest.trials.size() << " trials into " << out.string()
      << "\n";
  return summary;
}

DatasetInfo cmd_fuse(const fs::path& corpus, const fs::path& features, const fs::path& out, std::ostream& log) {
  const io::Manifest manifest = io::Manifest::load(corpus);
  if (manifest.trials.empty()) throw ValidationError("manifest lists no trials");

  std::vector<fs::path> ps_files, de_files;
  std::vector<Index> rows;
  DatasetInfo info;
  for (const auto& e : manifest.trials) {
    const std::string stem = io::trial_stem(e.participant, e.session, e.trial);
    ps_files.push_back(features / (stem + "_FFT.npy"));
    de_files.push_back(features / (stem + "_DE.npy"));
    const io::NpyHeader h = io::read_npy_header(ps_files.back());
    if (h.shape.size() != 2) throw IoError(ps_files.back().string() + ": expected a 2-D array");
    rows.push_back(static_cast<Index>(h.shape[0]));
    info.rows += rows.back();
  }
  info.trials = static_cast<Index>(manifest.trials.size());

  std::unique_ptr<io::NpyWriter> data;
  io::NpyWriter labels(out / "labels.npy", info.rows, kNumEmotions);
  std::vector<std::int64_t> trial_of;
  trial_of.reserve(static_cast<std::size_t>(info.rows));
  nlohmann::json trials = nlohmann::json::array();
  nlohmann::json blocks;
  for (std::size_t i = 0; i < manifest.trials.size(); ++i) {
    const auto& e = manifest.trials[i];
    const FeatureMatrix ps = load_feature(ps_files[i], FeatureKind::power_spectrum);
    const FeatureMatrix de = load_feature(de_files[i], FeatureKind::de);
    const FeatureMatrix eye = load_feature(manifest.eye_file(e), FeatureKind::eye);
    const FeatureMatrix fused = fusion::align_and_fuse(ps, eye, de);
    if (!data) {
      info.cols = fused.cols();
      data = std::make_unique<io::NpyWriter>(out / "data.npy", info.rows, info.cols);
      blocks = {{"power_spectrum", {0, ps.cols()}},
                {"de", {ps.cols(), ps.cols() + de.cols()}},
                {"eye", {ps.cols() + de.cols(), fused.cols()}}};
    }
    if (fused.rows() != rows[i]) throw ValidationError("row count changed while reading " + ps_files[i].string());
    data->append(fused.data);
    RowMatrixXd onehot(fused.rows(), kNumEmotions);
    onehot.rowwise() = label_to_onehot(e.label).transpose();
    labels.append(onehot);
    trial_of.insert(trial_of.end(), static_cast<std::size_t>(fused.rows()), static_cast<std::int64_t>(i));
    trials.push_back({{"participant", e.participant},
                      {"session", e.session},
                      {"trial", e.trial},
                      {"label", e.label.code()},
                      {"rows", fused.rows()},
                      {"power_spectrum", shape(ps.rows(), ps.cols())},
                      {"de", shape(de.rows(), de.cols())},
                      {"eye", shape(eye.rows(), eye.cols())}});
  }
  data->close();
  labels.close();
  io::write_npy(out / "trials.npy", std::span<const std::int64_t>(trial_of));
  io::write_json(out / "dataset.json", {{"format_version", 1},
                                        {"data", shape(info.rows, info.cols)},
                                        {"labels", shape(info.rows, kNumEmotions)},
                                        {"column_blocks", blocks},
                                        {"trials", trials}});
  log << "fused " << info.trials << " trials into (" << info.rows << ", " << info.cols << ") at " << out.string()
      << "\n";
  return info;
}

fusion::Corpus load_dataset(const fs::path& dir) {
  const nlohmann::json meta = io::read_json(dir / "dataset.json");
  fusion::Corpus c;
  c.data = io::read_npy_matrix(dir / "data.npy");
  c.labels = io::read_npy_matrix(dir / "labels.npy");
  const auto trial_of = io::read_npy_int64(dir / "trials.npy");
  if (c.labels.rows() != c.data.rows() || c.labels.cols() != kNumEmotions ||
      static_cast<Index>(trial_of.size()) != c.data.rows()) {
    throw ValidationError(dir.string() + ": data, labels and trials disagree in length");
  }
  try {
    for (const auto& t : meta.at("trials")) c.trial_labels.push_back(t.at("label").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(dir.string() + ": malformed dataset.json: " + e.what());
  }
  c.trial_of.assign(trial_of.begin(), trial_of.end());
  for (Index t : c.trial_of) {
    if (t < 0 || t >= c.trials()) throw ValidationError(dir.string() + ": trial index out of range");
  }
  return c;
}

nlohmann::json cmd_train(const fs::path& dataset, const fs::path& out, const PipelineConfig& cfg,
                         std::ostream& log) {
  const fusion::Corpus corpus = load_dataset(dataset);
  const nn::Architecture arch = architecture_for(corpus.data.cols());
  const eval::Experiment ex = eval::fit(corpus, cfg, arch, epoch_logger(log, ""));

  io::Checkpoint ckpt{ex.training.model, ex.scaler, {}};
  ckpt.metadata = {{"config", cfg},
                   {"split", eval::split_metadata(ex.split, cfg)},
                   {"dataset", {{"rows", corpus.rows()}, {"cols", corpus.data.cols()}, {"trials", corpus.trials()}}},
                   {"history", history_json(ex.training.history)}};
  io::save_checkpoint(out / "model.ckpt", ckpt);
  io::write_json(out / "history.json", history_json(ex.training.history));
  log << "trained " << cfg.epochs << " epochs on " << ex.split.train_indices.size() << " rows; checkpoint "
      << (out / "model.ckpt").string() << "\n";
  return ckpt.metadata;
}

eval::EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& dataset, const fs::path& out,
                          const nlohmann::json& overrides, std::ostream& log) {
  const io::Checkpoint ckpt = io::load_checkpoint(checkpoint);
  nlohmann::json cfg_json = ckpt.metadata.value("config", nlohmann::json(PipelineConfig{}));
  cfg_json.merge_patch(overrides);
  const PipelineConfig cfg = cfg_json.get<PipelineConfig>();
  cfg.validate();

  const fusion::Corpus corpus = load_dataset(dataset);
  if (corpus.data.cols() != ckpt.model.arch.input_len || ckpt.scaler.mean.size() != corpus.data.cols()) {
    throw ValidationError("checkpoint expects " + std::to_string(ckpt.model.arch.input_len) +
                          " features, dataset has " + std::to_string(corpus.data.cols()));
  }
  const eval::SplitAssignment split = eval::split(corpus, cfg);
  const eval::EvalReport report = eval::evaluate(corpus, ckpt.model, ckpt.scaler, split, cfg);
  io::write_json(out / "report.json", eval::to_json(report));
  io::write_text(out / "report.txt", eval::format_table(report));
  io::write_text(out / "confusion.csv", eval::confusion_csv(report));
  log << eval::format_table(report);
  return report;
}

eval::ProbeReport cmd_probe(const fs::path& dataset, const fs::path& out, const PipelineConfig& cfg,
                            std::ostream& log) {
  const fusion::Corpus corpus = load_dataset(dataset);
  const nn::Architecture arch = architecture_for(corpus.data.cols());
  const eval::ProbeReport report = eval::leakage_probe(
      corpus, cfg, arch, [&log](SplitMode mode, const nn::EpochStats& e) {
        log << to_string(mode) << " split, epoch " << e.epoch << ": loss " << e.mean_loss << "\n";
      });
  io::write_json(out / "probe.json", eval::to_json(report));
  std::ostringstream text;
  text << "window-level split\n" << eval::format_table(report.window) << "\ntrial-level split\n"
       << eval::format_table(report.trial) << "\n";
  text << std::fixed << std::setprecision(4) << "window accuracy " << report.window_accuracy << "\ntrial accuracy "
       << report.trial_accuracy << "\ngap " << report.gap << "\n";
  io::write_text(out / "probe.txt", text.str());
  log << text.str();
  return report;
}

nlohmann::json cmd_pipeline(const synth::SynthSpec& spec, const PipelineConfig& cfg, const fs::path& out,
                            std::ostream& log) {
  cfg.validate();
  spec.validate();
  const fs::path corpus = out / "corpus", features = out / "features", dataset = out / "dataset",
                 model = out / "model", report = out / "eval";
  const io::Manifest manifest = cmd_synth(spec, corpus, log);
  const ExtractSummary extracted = cmd_extract(corpus, features, cfg, log);
  if (extracted.exit_code != 0) {
    throw IoError("feature extraction failed for " + std::to_string(extracted.failures.size()) + " trials");
  }
  const DatasetInfo info = cmd_fuse(corpus, features, dataset, log);
  const nlohmann::json meta = cmd_train(dataset, model, cfg, log);
  const eval::EvalReport rep = cmd_eval(model / "model.ckpt", dataset, report, nlohmann::json::object(), log);

  const auto& first = manifest.trials.front();
  const std::string stem = io::trial_stem(first.participant, first.session, first.trial);
  auto dims = [](const fs::path& p) { return io::read_npy_header(p).shape; };
  nlohmann::json summary{
      {"synth_spec", spec},
      {"config", cfg},
      {"stages",
       {{"synth", {{"trials", manifest.trials.size()}, {"raw", dims(manifest.raw_file(first))},
                   {"eye", dims(manifest.eye_file(first))}}},
        {"extract", {{"trials", extracted.written}, {"power_spectrum", dims(features / (stem + "_FFT.npy"))},
                     {"de", dims(features / (stem + "_DE.npy"))}}},
        {"fuse", {{"data", shape(info.rows, info.cols)}, {"labels", shape(info.rows, kNumEmotions)},
                  {"trials", info.trials}}},
        {"train", {{"split", meta.at("split")}, {"history", meta.at("history")}}},
        {"eval", {{"accuracy", rep.accuracy}, {"total", rep.total}}}}},
      {"outputs",
       {{"manifest", "corpus/manifest.json"},
        {"dataset", "dataset/data.npy"},
        {"checkpoint", "model/model.ckpt"},
        {"report", "eval/report.json"}}}};
  io::write_json(out / "summary.json", summary);
  return summary;
}

}  // namespace neurofuse::cli

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "neurofuse/commands.hpp"
#include "neurofuse/io.hpp"

namespace nf = neurofuse;
namespace fs = std::filesystem;

namespace {

// Flags shared by the config-driven subcommands. Only flags that were given
// end up in the patch, so they override the config file but nothing else.
struct ConfigFlags {
  std::string config;
  std::string preset;
  std::uint64_t seed = 0;
  std::size_t window = 0, hop = 0, batch_size = 0, epochs = 0;
  std::string bands, split, scaler_fit;
  double train_fraction = 0.0;
  bool stratify = false;
  std::vector<std::pair<CLI::Option*, std::function<void(nlohmann::json&)>>> patchers;

  void attach(CLI::App* app, bool with_preset = true) {
    app->add_option("--config", config, "JSON config file; flags override it")->check(CLI::ExistingFile);
    if (with_preset) app->add_option("--preset", preset, "paper-shape, small or tiny");
    add(app->add_option("--seed", seed, "master RNG seed"), [this](auto& j) { j["rng_seed"] = seed; });
    add(app->add_option("--window", window, "FFT window length in samples"),
        [this](auto& j) { j["window_len"] = window; });
    add(app->add_option("--hop", hop, "window hop in samples"), [this](auto& j) { j["hop"] = hop; });
    add(app->add_option("--bands", bands, "comma-separated band edges in Hz"),
        [this](auto& j) { j["band_edges"] = parse_edges(bands); });
    add(app->add_option("--split", split, "window or trial")->check(CLI::IsMember({"window", "trial"})),
        [this](auto& j) { j["split_mode"] = split; });
    add(app->add_option("--train-fraction", train_fraction, "share of rows or trials used for training"),
        [this](auto& j) { j["train_fraction"] = train_fraction; });
    add(app->add_option("--batch-size", batch_size), [this](auto& j) { j["batch_size"] = batch_size; });
    add(app->add_option("--epochs", epochs), [this](auto& j) { j["epochs"] = epochs; });
    add(app->add_option("--scaler-fit", scaler_fit, "train or all")->check(CLI::IsMember({"train", "all"})),
        [this](auto& j) { j["scaler_fit"] = scaler_fit; });
    add(app->add_flag("--stratify", stratify, "split per class"), [this](auto& j) { j["stratify"] = stratify; });
  }

  void add(CLI::Option* opt, std::function<void(nlohmann::json&)> fn) { patchers.emplace_back(opt, std::move(fn)); }

  nlohmann::json patch() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [opt, fn] : patchers)
      if (opt->count() > 0) fn(j);
    return j;
  }

  /// defaults <- preset <- config file <- flags
  void resolve(nf::PipelineConfig& cfg, nf::synth::SynthSpec& spec) const {
    if (!preset.empty()) nf::cli::apply_preset(preset, cfg, spec);
    nlohmann::json j = cfg;
    if (!config.empty()) {
      nlohmann::json file = nf::io::read_json(config);
      if (file.contains("synth")) {
        nlohmann::json s = spec;
        s.merge_patch(file.at("synth"));
        spec = s.get<nf::synth::SynthSpec>();
        file.erase("synth");
      }
      j.merge_patch(file);
    }
    const nlohmann::json p = patch();
    j.merge_patch(p);
    cfg = j.get<nf::PipelineConfig>();
    if (p.contains("rng_seed")) spec.rng_seed = cfg.rng_seed;
    cfg.validate();
  }

  static std::vector<double> parse_edges(const std::string& text) {
    std::vector<double> edges;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
      try {
        edges.push_back(std::stod(token));
      } catch (const std::exception&) {
        throw nf::ValidationError("bad band edge '" + token + "'");
      }
    }
    return edges;
  }
};

struct SynthFlags {
  int participants = 0, sessions = 0;
  double trial_seconds = 0.0, noise_level = 0.0;
  CLI::Option *o_participants = nullptr, *o_sessions = nullptr, *o_seconds = nullptr, *o_noise = nullptr;

  void attach(CLI::App* app) {
    o_participants = app->add_option("--participants", participants);
    o_sessions = app->add_option("--sessions", sessions, "1 to 3");
    o_seconds = app->add_option("--trial-seconds", trial_seconds);
    o_noise = app->add_option("--noise-level", noise_level, "RMS of the background noise");
  }

  void apply(nf::synth::SynthSpec& spec) const {
    if (o_participants->count()) spec.n_participants = participants;
    if (o_sessions->count()) spec.n_sessions = sessions;
    if (o_seconds->count()) spec.trial_seconds = trial_seconds;
    if (o_noise->count()) spec.noise_level = noise_level;
    spec.validate();
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Multimodal EEG emotion-recognition pipeline"};
  app.require_subcommand(1);

  ConfigFlags cf;
  SynthFlags sf;
  std::string corpus, features, dataset, checkpoint, out;
  nf::PipelineConfig cfg;
  nf::synth::SynthSpec spec;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--out", out, "corpus directory")->required();
  cf.attach(synth);
  sf.attach(synth);

  auto* extract = app.add_subcommand("extract", "per-trial power-spectrum and DE features");
  extract->add_option("--corpus", corpus, "corpus directory")->required();
  extract->add_option("--out", out, "feature directory (default: the corpus directory)");
  cf.attach(extract);

  auto* fuse = app.add_subcommand("fuse", "stack trials into data/labels arrays");
  fuse->add_option("--corpus", corpus, "corpus directory")->required();
  fuse->add_option("--features", features, "feature directory (default: the corpus directory)");
  fuse->add_option("--out", out, "dataset directory")->required();

  auto* train = app.add_subcommand("train", "train the classifier");
  train->add_option("--dataset", dataset)->required();
  train->add_option("--out", out, "model directory")->required();
  cf.attach(train);

  auto* evaluate = app.add_subcommand("eval", "score a checkpoint on its test split");
  evaluate->add_option("--checkpoint", checkpoint)->required();
  evaluate->add_option("--dataset", dataset)->required();
  evaluate->add_option("--out", out, "report directory")->required();
  cf.attach(evaluate, false);

  auto* probe = app.add_subcommand("probe", "window-level vs trial-level split comparison");
  probe->add_option("--dataset", dataset)->required();
  probe->add_option("--out", out, "report directory")->required();
  cf.attach(probe);

  auto* pipeline = app.add_subcommand("pipeline", "synth, extract, fuse, train and eval in one run");
  pipeline->add_option("--out", out, "run directory")->required();
  ConfigFlags pf;  // separate instance: an option can belong to one subcommand only
  SynthFlags psf;
  pf.attach(pipeline);
  psf.attach(pipeline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::ostream& log = std::cerr;
  if (*synth) {
    cf.resolve(cfg, spec);
    sf.apply(spec);
    nf::cli::cmd_synth(spec, out, std::cout);
  } else if (*extract) {
    cf.resolve(cfg, spec);
    const auto summary = nf::cli::cmd_extract(corpus, out.empty() ? corpus : out, cfg, log);
    return summary.exit_code;
  } else if (*fuse) {
    nf::cli::cmd_fuse(corpus, features.empty() ? corpus : features, out, log);
  } else if (*train) {
    cf.resolve(cfg, spec);
    nf::cli::cmd_train(dataset, out, cfg, log);
  } else if (*evaluate) {
    nlohmann::json overrides = cf.config.empty() ? nlohmann::json::object() : nf::io::read_json(cf.config);
    overrides.merge_patch(cf.patch());
    nf::cli::cmd_eval(checkpoint, dataset, out, overrides, std::cout);
  } else if (*probe) {
    cf.resolve(cfg, spec);
    nf::cli::cmd_probe(dataset, out, cfg, std::cout);
  } else if (*pipeline) {
    pf.resolve(cfg, spec);
    psf.apply(spec);
    const auto summary = nf::cli::cmd_pipeline(spec, cfg, out, log);
    std::cout << "summary " << (fs::path(out) / "summary.json").string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const nf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#include "neurofuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace neurofuse::eval {

namespace {

constexpr std::uint64_t kSplitStream = 7;
constexpr std::uint64_t kTrainStream = 11;

// Keeps both sides non-empty once there are at least two items.
Index train_count(double fraction, Index total) {
  return std::clamp<Index>(round_half_up(fraction, total), 1, total - 1);
}

void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("train fraction must lie in (0, 1)");
}

std::string with_thousands(std::int64_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  const int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    out.push_back(digits[static_cast<std::size_t>(i)]);
    if ((n - i - 1) % 3 == 0 && i != n - 1) out.push_back(',');
  }
  return out;
}

std::string display_name(int code) {
  std::string name(EmotionLabel::from_code(code).name());
  name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  return name + " - " + std::to_string(code);
}

}  // namespace

Index round_half_up(double fraction, Index total) {
  return static_cast<Index>(std::floor(fraction * static_cast<double>(total) + 0.5));
}

SplitAssignment split_windows(Index rows, double train_fraction, std::uint64_t seed,
                              std::span<const int> labels) {
  check_fraction(train_fraction);
  if (rows < 2) throw ValidationError("split needs at least 2 rows");
  if (!labels.empty() && static_cast<Index>(labels.size()) != rows) {
    throw ValidationError("stratification labels do not match row count");
  }
  SplitAssignment out;
  out.mode = SplitMode::window;
  out.seed = seed;
  out.stratified = !labels.empty();
  Rng rng(derive_seed(seed, kSplitStream));

  std::vector<std::vector<Index>> groups(labels.empty() ? 1 : kNumEmotions);
  for (Index i = 0; i < rows; ++i) {
    groups[labels.empty() ? 0 : static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  }
  for (auto& group : groups) {
    const Index n = static_cast<Index>(group.size());
    if (n == 0) continue;
    rng.shuffle(group);
    const Index n_train = n < 2 ? n : train_count(train_fraction, n);
    out.train_indices.insert(out.train_indices.end(), group.begin(), group.begin() + n_train);
    out.test_indices.insert(out.test_indices.end(), group.begin() + n_train, group.end());
  }
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.test_indices.begin(), out.test_indices.end());
  return out;
}

SplitAssignment split_trials(std::span<const Index> trial_of, Index n_trials, double train_fraction,
                             std::uint64_t seed, std::span<const int> trial_labels) {
  check_fraction(train_fraction);
  if (n_trials < 2) throw ValidationError("trial split needs at least 2 trials");
  if (!trial_labels.empty() && static_cast<Index>(trial_labels.size()) != n_trials) {
    throw ValidationError("stratification labels do not match trial count");
  }
  SplitAssignment out;
  out.mode = SplitMode::trial;
  out.seed = seed;
  out.stratified = !trial_labels.empty();
  Rng rng(derive_seed(seed, kSplitStream));

  std::vector<std::vector<Index>> groups(trial_labels.empty() ? 1 : kNumEmotions);
  for (Index t = 0; t < n_trials; ++t) {
    groups[trial_labels.empty() ? 0 : static_cast<std::size_t>(trial_labels[static_cast<std::size_t>(t)])]
        .push_back(t);
  }
  std::vector<char> in_train(static_cast<std::size_t>(n_trials), 0);
  for (auto& group : groups) {
    const Index n = static_cast<Index>(group.size());
    if (n == 0) continue;
    rng.shuffle(group);
    const Index n_train = n < 2 ? n : train_count(train_fraction, n);
    for (Index i = 0; i < n_train; ++i) in_train[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])] = 1;
  }
  for (std::size_t row = 0; row < trial_of.size(); ++row) {
    const Index t = trial_of[row];
    if (t < 0 || t >= n_trials) throw ValidationError("row refers to an unknown trial");
    (in_train[static_cast<std::size_t>(t)] ? out.train_indices : out.test_indices).push_back(static_cast<Index>(row));
  }
  return out;
}

SplitAssignment split(const fusion::Corpus& corpus, const PipelineConfig& cfg) {
  if (cfg.split_mode == SplitMode::window) {
    const std::vector<int> labels = cfg.stratify ? labels_from_onehot(corpus.labels) : std::vector<int>{};
    return split_windows(corpus.rows(), cfg.train_fraction, cfg.rng_seed, labels);
  }
  return split_trials(corpus.trial_of, corpus.trials(), cfg.train_fraction, cfg.rng_seed,
                      cfg.stratify ? std::span<const int>(corpus.trial_labels) : std::span<const int>{});
}

std::vector<int> labels_from_onehot(const RowMatrixXd& onehot) {
  std::vector<int> out(static_cast<std::size_t>(onehot.rows()));
  for (Index i = 0; i < onehot.rows(); ++i) {
    Index code;
    onehot.row(i).maxCoeff(&code);
    out[static_cast<std::size_t>(i)] = static_cast<int>(code);
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ValidationError("truth and prediction lengths differ");
  ConfusionMatrix m = ConfusionMatrix::Zero();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= kNumEmotions || p < 0 || p >= kNumEmotions) {
      throw ValidationError("class code out of range at row " + std::to_string(i));
    }
    ++m(t, p);
  }
  return m;
}

std::array<ClassMetrics, kNumEmotions> prf1(const ConfusionMatrix& confusion) {
  std::array<ClassMetrics, kNumEmotions> out{};
  for (int c = 0; c < kNumEmotions; ++c) {
    const std::int64_t tp = confusion(c, c);
    const std::int64_t predicted = confusion.col(c).sum();
    const std::int64_t actual = confusion.row(c).sum();
    ClassMetrics& m = out[static_cast<std::size_t>(c)];
    m.support = actual;
    if (predicted > 0) m.precision = double(tp) / double(predicted);
    else m.precision_undefined = true;
    if (actual > 0) m.recall = double(tp) / double(actual);
    else m.recall_undefined = true;
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else m.f1_undefined = true;
  }
  return out;
}

EvalReport make_report(std::span<const int> truth, std::span<const int> predicted, nlohmann::json split_meta) {
  EvalReport r;
  r.confusion = confusion_matrix(truth, predicted);
  r.per_class = prf1(r.confusion);
  r.total = r.confusion.sum();
  r.accuracy = r.total > 0 ? double(r.confusion.trace()) / double(r.total) : 0.0;
  r.split = std::move(split_meta);
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json classes = nlohmann::json::array();
  for (int c = 0; c < kNumEmotions; ++c) {
    const auto& m = report.per_class[static_cast<std::size_t>(c)];
    nlohmann::json flags = nlohmann::json::array();
    if (m.precision_undefined) flags.push_back("precision_0_over_0");
    if (m.recall_undefined) flags.push_back("recall_0_over_0");
    if (m.f1_undefined) flags.push_back("f1_0_over_0");
    classes.push_back({{"code", c},
                       {"label", EmotionLabel::from_code(c).name()},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"flags", flags}});
  }
  nlohmann::json confusion = nlohmann::json::array();
  for (int i = 0; i < kNumEmotions; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < kNumEmotions; ++j) row.push_back(report.confusion(i, j));
    confusion.push_back(row);
  }
  return {{"accuracy", report.accuracy},
          {"total", report.total},
          {"per_class", classes},
          {"confusion", confusion},
          {"split", report.split}};
}

std::string format_table(const EvalReport& report) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-13s %9s %7s %9s %12s\n", "Class-Label", "Precision", "Recall",
                "F1-score", "Data Points");
  os << line;
  for (int c = 0; c < kNumEmotions; ++c) {
    const auto& m = report.per_class[static_cast<std::size_t>(c)];
    std::snprintf(line, sizeof line, "%-13s %9.2f %7.2f %9.2f %12s\n", display_name(c).c_str(), m.precision,
                  m.recall, m.f1, with_thousands(m.support).c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "\naccuracy %.4f over %s test rows\n", report.accuracy,
                with_thousands(report.total).c_str());
  os << line;
  return os.str();
}

std::string confusion_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "true\\predicted";
  for (int j = 0; j < kNumEmotions; ++j) os << ',' << EmotionLabel::from_code(j).name();
  os << '\n';
  for (int i = 0; i < kNumEmotions; ++i) {
    os << EmotionLabel::from_code(i).name();
    for (int j = 0; j < kNumEmotions; ++j) os << ',' << report.confusion(i, j);
    os << '\n';
  }
  return os.str();
}

nlohmann::json split_metadata(const SplitAssignment& split, const PipelineConfig& cfg) {
  return {{"mode", to_string(split.mode)},
          {"train_fraction", cfg.train_fraction},
          {"seed", split.seed},
          {"stratified", split.stratified},
          {"train_rows", split.train_indices.size()},
          {"test_rows", split.test_indices.size()},
          {"scaler_fit", to_string(cfg.scaler_fit)}};
}

Experiment fit(const fusion::Corpus& corpus, const PipelineConfig& cfg, const nn::Architecture& arch,
               std::function<void(const nn::EpochStats&)> on_epoch) {
  cfg.validate();
  Experiment ex;
  ex.split = split(corpus, cfg);
  ex.scaler = cfg.scaler_fit == ScalerFit::train ? nn::scaler_fit(corpus.data, ex.split.train_indices)
                                                 : nn::scaler_fit(corpus.data);

  nn::DataView train_view{&corpus.data, &corpus.labels, ex.split.train_indices, &ex.scaler};
  nn::TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.batch_size = cfg.batch_size;
  opt.adam.learning_rate = cfg.learning_rate;
  opt.seed = derive_seed(cfg.rng_seed, kTrainStream);
  opt.on_epoch = std::move(on_epoch);
  ex.training = nn::train<double>(train_view, arch, opt);
  return ex;
}

EvalReport evaluate(const fusion::Corpus& corpus, const nn::ModelParams<double>& model,
                    const nn::ScalerStats& scaler, const SplitAssignment& split, const PipelineConfig& cfg) {
  nn::DataView test_view{&corpus.data, nullptr, split.test_indices, &scaler};
  const std::vector<int> predicted = nn::predict(model, test_view);
  std::vector<int> truth;
  truth.reserve(split.test_indices.size());
  for (Index row : split.test_indices) {
    Index code;
    corpus.labels.row(row).maxCoeff(&code);
    truth.push_back(static_cast<int>(code));
  }
  return make_report(truth, predicted, split_metadata(split, cfg));
}

Experiment run_experiment(const fusion::Corpus& corpus, const PipelineConfig& cfg,
                          const nn::Architecture& arch, std::function<void(const nn::EpochStats&)> on_epoch) {
  Experiment ex = fit(corpus, cfg, arch, std::move(on_epoch));
  ex.report = evaluate(corpus, ex.training.model, ex.scaler, ex.split, cfg);
  return ex;
}

ProbeReport leakage_probe(const fusion::Corpus& corpus, const PipelineConfig& cfg,
                          const nn::Architecture& arch,
                          std::function<void(SplitMode, const nn::EpochStats&)> on_epoch) {
  for (int c = 0; c < kNumEmotions; ++c) {
    if (std::count(corpus.trial_labels.begin(), corpus.trial_labels.end(), c) < 2) {
      throw ValidationError("leakage probe needs at least 2 trials per class");
    }
  }
  ProbeReport out;
  for (SplitMode mode : {SplitMode::window, SplitMode::trial}) {
    PipelineConfig run_cfg = cfg;
    run_cfg.split_mode = mode;
    std::function<void(const nn::EpochStats&)> cb;
    if (on_epoch) cb = [&](const nn::EpochStats& s) { on_epoch(mode, s); };
    Experiment ex = run_experiment(corpus, run_cfg, arch, cb);
    (mode == SplitMode::window ? out.window : out.trial) = std::move(ex.report);
  }
  out.window_accuracy = out.window.accuracy;
  out.trial_accuracy = out.trial.accuracy;
  out.gap = out.window_accuracy - out.trial_accuracy;
  return out;
}

nlohmann::json to_json(const ProbeReport& report) {
  return {{"window_mode_accuracy", report.window_accuracy},
          {"trial_mode_accuracy", report.trial_accuracy},
          {"gap", report.gap},
          {"window", to_json(report.window)},
          {"trial", to_json(report.trial)}};
}

}  // namespace neurofuse::eval

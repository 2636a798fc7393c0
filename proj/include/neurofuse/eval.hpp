#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurofuse/core.hpp"
#include "neurofuse/fusion.hpp"
#include "neurofuse/nn.hpp"

namespace neurofuse::eval {

struct SplitAssignment {
  SplitMode mode = SplitMode::window;
  std::vector<Index> train_indices;  // ascending
  std::vector<Index> test_indices;   // ascending
  std::uint64_t seed = 0;
  bool stratified = false;
};

/// floor(fraction * total + 0.5)
Index round_half_up(double fraction, Index total);

/// Uniform random partition of rows; round_half_up(fraction * rows) go to
/// train. With `labels`, the rule is applied per class (stratified).
SplitAssignment split_windows(Index rows, double train_fraction, std::uint64_t seed,
                              std::span<const int> labels = {});

/// Random partition of whole trials; every row follows its trial. With
/// `trial_labels`, trials are drawn per class.
SplitAssignment split_trials(std::span<const Index> trial_of, Index n_trials, double train_fraction,
                             std::uint64_t seed, std::span<const int> trial_labels = {});

/// Dispatches on cfg.split_mode and cfg.stratify.
SplitAssignment split(const fusion::Corpus& corpus, const PipelineConfig& cfg);

/// Row-wise class codes of a one-hot label matrix.
std::vector<int> labels_from_onehot(const RowMatrixXd& onehot);

using ConfusionMatrix = Eigen::Matrix<std::int64_t, kNumEmotions, kNumEmotions, Eigen::RowMajor>;

/// Entry (i, j) counts rows with true class i predicted as j.
ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  // 0/0 cases, reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

std::array<ClassMetrics, kNumEmotions> prf1(const ConfusionMatrix& confusion);

struct EvalReport {
  ConfusionMatrix confusion = ConfusionMatrix::Zero();
  std::array<ClassMetrics, kNumEmotions> per_class{};
  double accuracy = 0.0;
  std::int64_t total = 0;
  nlohmann::json split;  // mode, fraction, seed, sizes
};

EvalReport make_report(std::span<const int> truth, std::span<const int> predicted,
                       nlohmann::json split_meta = nlohmann::json::object());

nlohmann::json to_json(const EvalReport& report);
/// Per-class precision/recall/F1/support table for humans.
std::string format_table(const EvalReport& report);
std::string confusion_csv(const EvalReport& report);

/// Result of split -> scale -> train -> evaluate on one corpus.
struct Experiment {
  SplitAssignment split;
  nn::ScalerStats scaler;
  nn::TrainResult<double> training;
  EvalReport report;
};

nlohmann::json split_metadata(const SplitAssignment& split, const PipelineConfig& cfg);

/// Split, scaler and training only; the report is left empty.
Experiment fit(const fusion::Corpus& corpus, const PipelineConfig& cfg, const nn::Architecture& arch,
               std::function<void(const nn::EpochStats&)> on_epoch = {});

/// Predicts the test rows of `split` and scores them.
EvalReport evaluate(const fusion::Corpus& corpus, const nn::ModelParams<double>& model,
                    const nn::ScalerStats& scaler, const SplitAssignment& split, const PipelineConfig& cfg);

Experiment run_experiment(const fusion::Corpus& corpus, const PipelineConfig& cfg,
                          const nn::Architecture& arch,
                          std::function<void(const nn::EpochStats&)> on_epoch = {});

struct ProbeReport {
  double window_accuracy = 0.0;
  double trial_accuracy = 0.0;
  double gap = 0.0;  // window - trial
  EvalReport window;
  EvalReport trial;
};

/// Trains identical models (same seeds and epochs) under window-level and
/// trial-level splits and reports both test accuracies.
ProbeReport leakage_probe(const fusion::Corpus& corpus, const PipelineConfig& cfg,
                          const nn::Architecture& arch,
                          std::function<void(SplitMode, const nn::EpochStats&)> on_epoch = {});

nlohmann::json to_json(const ProbeReport& report);

}  // namespace neurofuse::eval

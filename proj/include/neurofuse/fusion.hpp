#pragma once

#include <array>
#include <vector>

#include "neurofuse/core.hpp"

namespace neurofuse::fusion {

/// How many times each low-rate source row is repeated to reach the
/// high-rate window count.
struct RepeatPlan {
  std::vector<Index> counts;

  Index source_rows() const { return static_cast<Index>(counts.size()); }
  Index destination_rows() const;
};

/// counts = floor(dst/src) for every row, plus one for the first
/// dst mod src rows. Throws when src > dst; rows are never dropped.
RepeatPlan compute_repeat_plan(Index src_rows, Index dst_rows);

/// Repeats row i plan.counts[i] times in place, preserving row order.
FeatureMatrix pad_rows(const FeatureMatrix& m, const RepeatPlan& plan);

/// Modality order of the fused columns.
inline constexpr std::array<FeatureKind, 3> kFusedOrder = {FeatureKind::power_spectrum,
                                                           FeatureKind::de, FeatureKind::eye};

/// Horizontal concatenation [power_spectrum | de | eye].
FeatureMatrix fuse(const FeatureMatrix& power_spectrum, const FeatureMatrix& eye,
                   const FeatureMatrix& de);

/// Pads eye and DE rows to the power-spectrum window count, then fuses.
FeatureMatrix align_and_fuse(const FeatureMatrix& power_spectrum, const FeatureMatrix& eye,
                             const FeatureMatrix& de);

struct LabeledTrial {
  FeatureMatrix fused;
  EmotionLabel label;
};

struct Corpus {
  RowMatrixXd data;
  RowMatrixXd labels;           // one-hot, kNumEmotions columns
  std::vector<Index> trial_of;  // source trial index of every row
  std::vector<int> trial_labels;

  Index rows() const { return data.rows(); }
  Index trials() const { return static_cast<Index>(trial_labels.size()); }
};

/// Incremental corpus assembly into preallocated storage, so per-trial
/// matrices can be dropped as soon as they are appended.
class CorpusBuilder {
 public:
  CorpusBuilder(Index total_rows, Index width);

  void append(const FeatureMatrix& fused, EmotionLabel label);
  /// Throws unless exactly total_rows rows were appended.
  Corpus finish() &&;

 private:
  Corpus corpus_;
  Index next_row_ = 0;
};

/// Stacks trials vertically in order and expands each trial's label to a
/// one-hot row per window.
Corpus assemble_corpus(const std::vector<LabeledTrial>& trials);

}  // namespace neurofuse::fusion

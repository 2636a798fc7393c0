#include "neurofuse/fusion.hpp"

#include <numeric>
#include <string>

namespace neurofuse::fusion {

Index RepeatPlan::destination_rows() const {
  return std::accumulate(counts.begin(), counts.end(), Index{0});
}

RepeatPlan compute_repeat_plan(Index src_rows, Index dst_rows) {
  if (src_rows < 1) throw ValidationError("repeat plan needs at least one source row");
  if (src_rows > dst_rows) {
    throw ValidationError("downsampling not supported: " + std::to_string(src_rows) +
                          " source rows > " + std::to_string(dst_rows) + " destination rows");
  }
  const Index base = dst_rows / src_rows;
  const Index remainder = dst_rows - base * src_rows;
  RepeatPlan plan;
  plan.counts.assign(static_cast<std::size_t>(src_rows), base);
  for (Index i = 0; i < remainder; ++i) ++plan.counts[static_cast<std::size_t>(i)];
  return plan;
}

FeatureMatrix pad_rows(const FeatureMatrix& m, const RepeatPlan& plan) {
  if (plan.source_rows() != m.rows()) {
    throw ValidationError("repeat plan covers " + std::to_string(plan.source_rows()) +
                          " rows but matrix has " + std::to_string(m.rows()));
  }
  FeatureMatrix out;
  out.kind = m.kind;
  out.col_names = m.col_names;
  out.data.resize(plan.destination_rows(), m.cols());
  Index row = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    const Index count = plan.counts[static_cast<std::size_t>(i)];
    if (count < 1) throw ValidationError("repeat counts must be >= 1");
    out.data.middleRows(row, count).rowwise() = m.data.row(i);
    row += count;
  }
  if (m.rows() > 0) {
    const double scale = static_cast<double>(m.rows()) / static_cast<double>(out.rows());
    out.row_seconds = m.row_seconds * scale;
    out.row_step_seconds = m.row_step_seconds * scale;
  }
  return out;
}

FeatureMatrix fuse(const FeatureMatrix& power_spectrum, const FeatureMatrix& eye,
                   const FeatureMatrix& de) {
  const FeatureMatrix* parts[] = {&power_spectrum, &de, &eye};
  for (std::size_t i = 0; i < kFusedOrder.size(); ++i) {
    if (parts[i]->kind != kFusedOrder[i]) {
      throw ValidationError("fuse expected a " + std::string(to_string(kFusedOrder[i])) +
                            " matrix, got " + std::string(to_string(parts[i]->kind)));
    }
  }
  const Index rows = power_spectrum.rows();
  for (const FeatureMatrix* part : parts) {
    if (part->rows() != rows) {
      throw ValidationError("alignment error: " + std::string(to_string(part->kind)) + " has " +
                            std::to_string(part->rows()) + " rows, power_spectrum has " +
                            std::to_string(rows));
    }
  }

  FeatureMatrix out;
  out.kind = FeatureKind::fused;
  out.row_seconds = power_spectrum.row_seconds;
  out.row_step_seconds = power_spectrum.row_step_seconds;
  Index width = 0;
  for (const FeatureMatrix* part : parts) width += part->cols();
  out.data.resize(rows, width);
  Index col = 0;
  bool named = true;
  for (const FeatureMatrix* part : parts) {
    out.data.middleCols(col, part->cols()) = part->data;
    col += part->cols();
    named = named && static_cast<Index>(part->col_names.size()) == part->cols();
  }
  if (named) {
    for (const FeatureMatrix* part : parts) {
      out.col_names.insert(out.col_names.end(), part->col_names.begin(), part->col_names.end());
    }
  }
  return out;
}

FeatureMatrix align_and_fuse(const FeatureMatrix& power_spectrum, const FeatureMatrix& eye,
                             const FeatureMatrix& de) {
  const Index rows = power_spectrum.rows();
  return fuse(power_spectrum, pad_rows(eye, compute_repeat_plan(eye.rows(), rows)),
              pad_rows(de, compute_repeat_plan(de.rows(), rows)));
}

CorpusBuilder::CorpusBuilder(Index total_rows, Index width) {
  if (total_rows < 1 || width < 1) throw ValidationError("corpus must have rows and columns");
  corpus_.data.resize(total_rows, width);
  corpus_.labels.setZero(total_rows, kNumEmotions);
  corpus_.trial_of.reserve(static_cast<std::size_t>(total_rows));
}

void CorpusBuilder::append(const FeatureMatrix& fused, EmotionLabel label) {
  if (fused.kind != FeatureKind::fused) throw ValidationError("corpus expects fused matrices");
  if (fused.cols() != corpus_.data.cols()) {
    throw ValidationError("fused width mismatch: " + std::to_string(fused.cols()) + " vs " +
                          std::to_string(corpus_.data.cols()));
  }
  if (next_row_ + fused.rows() > corpus_.data.rows()) {
    throw ValidationError("corpus overflow: more rows appended than reserved");
  }
  const Index trial = corpus_.trials();
  corpus_.data.middleRows(next_row_, fused.rows()) = fused.data;
  corpus_.labels.middleRows(next_row_, fused.rows()).col(label.code()).setOnes();
  corpus_.trial_of.insert(corpus_.trial_of.end(), static_cast<std::size_t>(fused.rows()), trial);
  corpus_.trial_labels.push_back(label.code());
  next_row_ += fused.rows();
}

Corpus CorpusBuilder::finish() && {
  if (next_row_ != corpus_.data.rows()) {
    throw ValidationError("corpus incomplete: " + std::to_string(next_row_) + " of " +
                          std::to_string(corpus_.data.rows()) + " rows filled");
  }
  return std::move(corpus_);
}

Corpus assemble_corpus(const std::vector<LabeledTrial>& trials) {
  if (trials.empty()) throw ValidationError("cannot assemble an empty corpus");
  Index total = 0;
  for (const auto& t : trials) total += t.fused.rows();
  CorpusBuilder builder(total, trials.front().fused.cols());
  for (const auto& t : trials) builder.append(t.fused, t.label);
  return std::move(builder).finish();
}

}  // namespace neurofuse::fusion

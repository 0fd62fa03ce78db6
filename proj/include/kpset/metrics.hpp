#pragma once

#include <string>
#include <vector>

namespace kpset {

/// Keeps the first occurrence of each stemmed form, preserving order.
std::vector<std::string> dedup_stemmed(const std::vector<std::string>& preds);

/// F1 over all predictions with stem-level exact phrase matching. Zero when
/// either side is empty. Expects deduplicated predictions.
double f1_at_m(const std::vector<std::string>& preds, const std::vector<std::string>& targets);

/// F1 over the top five predictions; fewer than five are padded with blanks
/// that never match, so precision always divides by five.
double f1_at_5(const std::vector<std::string>& preds, const std::vector<std::string>& targets);

struct DocumentPredictions {
  /// Normalized document words (used for the present/absent split of predictions).
  std::vector<std::string> doc_words;
  /// Predictions in slot order, duplicates included.
  std::vector<std::string> predictions;
  std::vector<std::string> present_targets;
  std::vector<std::string> absent_targets;
};

struct DiversityStats {
  double avg_present = 0.0;
  double avg_absent = 0.0;
  double dup_ratio = 0.0;
};

/// Mean unique present/absent prediction counts and mean per-document
/// duplication ratio 1 - unique/total (0 for a document without predictions).
DiversityStats diversity_stats(const std::vector<DocumentPredictions>& docs);

/// "5.10 / 2.01 / 0.08"
std::string format_diversity(const DiversityStats& s);

struct SideScores {
  double f1_at_5 = 0.0;
  double f1_at_m = 0.0;
};

struct ScoreReport {
  std::size_t documents = 0;
  SideScores present;
  SideScores absent;
  DiversityStats diversity;
};

/// Macro-averaged scores. Predictions are deduplicated, then split into
/// present/absent by stemmed contiguity against the document.
ScoreReport score_corpus(const std::vector<DocumentPredictions>& docs);

/// Machine-readable key-value block followed by nothing else.
std::string report_json(const ScoreReport& r);
/// Aligned human-readable table.
std::string report_table(const ScoreReport& r);

}  // namespace kpset

#include "kpset/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kpset/corpus.hpp"

namespace kpset {

namespace {

std::set<std::string> stem_set(const std::vector<std::string>& phrases) {
  std::set<std::string> out;
  for (const auto& p : phrases) out.insert(join_stems(p));
  return out;
}

double f1(std::size_t matches, std::size_t n_pred, std::size_t n_target) {
  if (n_pred == 0 || n_target == 0 || matches == 0) return 0.0;
  const double p = static_cast<double>(matches) / static_cast<double>(n_pred);
  const double r = static_cast<double>(matches) / static_cast<double>(n_target);
  return 2.0 * p * r / (p + r);
}

std::size_t count_matches(const std::vector<std::string>& preds, const std::set<std::string>& targets) {
  std::size_t n = 0;
  for (const auto& p : preds) n += targets.count(join_stems(p));
  return n;
}

}  // namespace

std::vector<std::string> dedup_stemmed(const std::vector<std::string>& preds) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : preds) {
    if (seen.insert(join_stems(p)).second) out.push_back(p);
  }
  return out;
}

double f1_at_m(const std::vector<std::string>& preds, const std::vector<std::string>& targets) {
  const auto t = stem_set(targets);
  return f1(count_matches(preds, t), preds.size(), t.size());
}

double f1_at_5(const std::vector<std::string>& preds, const std::vector<std::string>& targets) {
  const auto t = stem_set(targets);
  const std::vector<std::string> top(preds.begin(), preds.begin() + std::min<std::size_t>(5, preds.size()));
  return f1(count_matches(top, t), 5, t.size());
}

DiversityStats diversity_stats(const std::vector<DocumentPredictions>& docs) {
  DiversityStats s;
  if (docs.empty()) return s;
  for (const auto& d : docs) {
    const auto unique = dedup_stemmed(d.predictions);
    const auto doc_stems = stem_all(d.doc_words);
    for (const auto& p : unique) {
      if (contains_contiguous(doc_stems, stem_all(tokenize(p)))) {
        s.avg_present += 1.0;
      } else {
        s.avg_absent += 1.0;
      }
    }
    if (!d.predictions.empty()) {
      s.dup_ratio += 1.0 - static_cast<double>(unique.size()) / static_cast<double>(d.predictions.size());
    }
  }
  const auto n = static_cast<double>(docs.size());
  s.avg_present /= n;
  s.avg_absent /= n;
  s.dup_ratio /= n;
  return s;
}

std::string format_diversity(const DiversityStats& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f / %.2f / %.2f", s.avg_present, s.avg_absent, s.dup_ratio);
  return buf;
}

ScoreReport score_corpus(const std::vector<DocumentPredictions>& docs) {
  ScoreReport r;
  r.documents = docs.size();
  if (docs.empty()) return r;
  for (const auto& d : docs) {
    const auto unique = dedup_stemmed(d.predictions);
    const auto doc_stems = stem_all(d.doc_words);
    std::vector<std::string> present, absent;
    for (const auto& p : unique) {
      (contains_contiguous(doc_stems, stem_all(tokenize(p))) ? present : absent).push_back(p);
    }
    r.present.f1_at_5 += f1_at_5(present, d.present_targets);
    r.present.f1_at_m += f1_at_m(present, d.present_targets);
    r.absent.f1_at_5 += f1_at_5(absent, d.absent_targets);
    r.absent.f1_at_m += f1_at_m(absent, d.absent_targets);
  }
  const auto n = static_cast<double>(docs.size());
  r.present.f1_at_5 /= n;
  r.present.f1_at_m /= n;
  r.absent.f1_at_5 /= n;
  r.absent.f1_at_m /= n;
  r.diversity = diversity_stats(docs);
  return r;
}

std::string report_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["documents"] = r.documents;
  j["present"] = {{"f1_at_5", r.present.f1_at_5}, {"f1_at_m", r.present.f1_at_m}};
  j["absent"] = {{"f1_at_5", r.absent.f1_at_5}, {"f1_at_m", r.absent.f1_at_m}};
  j["avg_present"] = r.diversity.avg_present;
  j["avg_absent"] = r.diversity.avg_absent;
  j["dup_ratio"] = r.diversity.dup_ratio;
  return j.dump(2);
}

std::string report_table(const ScoreReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "documents  %zu\n"
                "           F1@5    F1@M\n"
                "present    %.4f  %.4f\n"
                "absent     %.4f  %.4f\n"
                "#Pre / #Abs / Dup  %s\n",
                r.documents, r.present.f1_at_5, r.present.f1_at_m, r.absent.f1_at_5,
                r.absent.f1_at_m, format_diversity(r.diversity).c_str());
  return buf;
}

}  // namespace kpset

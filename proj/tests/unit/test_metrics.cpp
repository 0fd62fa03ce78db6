#include "doctest.h"
#include "kpset/metrics.hpp"

using namespace kpset;
using S = std::vector<std::string>;

TEST_CASE("dedup_stemmed") {
  CHECK(dedup_stemmed({"topic models", "topic model"}) == S{"topic models"});
  CHECK(dedup_stemmed({}).empty());
  CHECK(dedup_stemmed({"a", "b", "c"}) == S{"a", "b", "c"});
}

TEST_CASE("f1_at_m") {
  CHECK(f1_at_m({"a", "b"}, {"a", "c"}) == 0.5);
  CHECK(f1_at_m({"a", "b"}, {"b", "a"}) == 1.0);
  CHECK(f1_at_m({"a"}, {"b"}) == 0.0);
  CHECK(f1_at_m({}, {"b"}) == 0.0);
  CHECK(f1_at_m({"a"}, {}) == 0.0);
  CHECK(f1_at_m({"topic models"}, {"topic model"}) == 1.0);
  CHECK(f1_at_m({"b", "a"}, {"c", "a"}) == f1_at_m({"a", "b"}, {"a", "c"}));
}

TEST_CASE("f1_at_5") {
  CHECK(f1_at_5({"a", "b"}, {"a", "c", "d"}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(f1_at_5({"a", "b", "c", "d", "e"}, {"a", "b", "c", "d", "e"}) == 1.0);
  CHECK(f1_at_5({"x", "a", "y", "b", "z", "c", "d"}, {"a", "b", "c", "d"}) ==
        doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  const S five = {"a", "x", "b", "y", "z"};
  CHECK(f1_at_5(five, {"a", "b", "q"}) == f1_at_m(five, {"a", "b", "q"}));
}

TEST_CASE("diversity stats") {
  DocumentPredictions d;
  d.doc_words = {"a", "b"};
  d.predictions = {"a", "a", "c"};
  DiversityStats s = diversity_stats({d});
  CHECK(s.dup_ratio == doctest::Approx(1.0 / 3.0));
  CHECK(s.avg_present == 1.0);
  CHECK(s.avg_absent == 1.0);

  DocumentPredictions e;
  e.doc_words = {"x"};
  s = diversity_stats({e});
  CHECK(s.dup_ratio == 0.0);

  CHECK(format_diversity({5.1, 2.013, 0.0777}) == "5.10 / 2.01 / 0.08");
}

TEST_CASE("corpus scores") {
  DocumentPredictions d;
  d.doc_words = {"topic", "model", "for", "denoising"};
  d.predictions = {"topic models", "topic model", "patch clustering", "image"};
  d.present_targets = {"topic model", "denoising"};
  d.absent_targets = {"patch clustering"};
  const ScoreReport one = score_corpus({d});
  CHECK(one.present.f1_at_m == doctest::Approx(2.0 / 3.0));
  CHECK(one.absent.f1_at_m == doctest::Approx(2.0 / 3.0));
  CHECK(one.absent.f1_at_5 == doctest::Approx(2 * 0.2 / 1.2));
  const ScoreReport three = score_corpus({d, d, d});
  CHECK(three.present.f1_at_5 == doctest::Approx(one.present.f1_at_5));
  CHECK(three.present.f1_at_m == doctest::Approx(one.present.f1_at_m));
  CHECK(three.documents == 3);

  DocumentPredictions empty_abs = d;
  empty_abs.absent_targets.clear();
  const ScoreReport r = score_corpus({empty_abs});
  CHECK(r.absent.f1_at_m == 0.0);
  const std::string json = report_json(r);
  CHECK(json.find("\"present\"") != std::string::npos);
  CHECK(json.find("\"absent\"") != std::string::npos);
  CHECK(report_table(r).find("F1@M") != std::string::npos);
  CHECK(score_corpus({}).documents == 0);
}

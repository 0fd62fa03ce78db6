#include "kpset/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "kpset/corpus.hpp"

namespace kpset {

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  // Plain modulo keeps the stream identical across standard libraries.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  int between(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1))); }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[index(v.size())];
  }

 private:
  std::mt19937_64 rng_;
};

void require_nonempty(const std::vector<std::string>& pool, const std::string& what) {
  if (pool.empty()) throw std::invalid_argument("grammar pool is empty: " + what);
}

void validate(const Grammar& g) {
  if (g.topics.empty()) throw std::invalid_argument("grammar pool is empty: topics");
  require_nonempty(g.fillers, "fillers");
  require_nonempty(g.templates, "templates");
  for (const auto& t : g.topics) {
    require_nonempty(t.nouns, t.name + ".nouns");
    require_nonempty(t.modifiers, t.name + ".modifiers");
    require_nonempty(t.absent_phrases, t.name + ".absent_phrases");
  }
  if (g.min_present < 1 || g.max_present < g.min_present || g.min_absent < 0 ||
      g.max_absent < g.min_absent || g.min_filler_sentences < 0 ||
      g.max_filler_sentences < g.min_filler_sentences) {
    throw std::invalid_argument("grammar count ranges are inconsistent");
  }
  bool has_kp = std::any_of(g.templates.begin(), g.templates.end(),
                            [](const std::string& t) { return t.find("{kp}") != std::string::npos; });
  if (!has_kp) throw std::invalid_argument("grammar has no template with a {kp} slot");
}

std::string fill_template(const std::string& tmpl, const std::string& kp, Sampler& s,
                          const std::vector<std::string>& fillers) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.compare(i, 4, "{kp}") == 0) {
      out += kp;
      i += 4;
    } else if (tmpl.compare(i, 3, "{w}") == 0) {
      out += s.pick(fillers);
      i += 3;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

}  // namespace

std::set<std::string> Grammar::word_pool() const {
  std::set<std::string> pool;
  auto add = [&](const std::string& text) {
    for (auto& w : tokenize(text)) pool.insert(std::move(w));
  };
  for (const auto& t : topics) {
    for (const auto& w : t.nouns) add(w);
    for (const auto& w : t.modifiers) add(w);
    for (const auto& w : t.absent_phrases) add(w);
  }
  for (const auto& w : fillers) add(w);
  for (const auto& t : templates) {
    std::string stripped;
    for (std::size_t i = 0; i < t.size();) {
      if (t.compare(i, 4, "{kp}") == 0) {
        stripped += ' ';
        i += 4;
      } else if (t.compare(i, 3, "{w}") == 0) {
        stripped += ' ';
        i += 3;
      } else {
        stripped += t[i++];
      }
    }
    add(stripped);
  }
  return pool;
}

std::vector<SyntheticRecord> gen_synthetic(std::uint64_t seed, std::size_t size,
                                           const Grammar& grammar) {
  validate(grammar);
  Sampler s(seed);

  std::vector<std::string> kp_templates;
  std::vector<std::string> plain_templates;
  for (const auto& t : grammar.templates) {
    (t.find("{kp}") != std::string::npos ? kp_templates : plain_templates).push_back(t);
  }

  std::vector<SyntheticRecord> out;
  out.reserve(size);
  while (out.size() < size) {
    const TopicPool& topic = s.pick(grammar.topics);
    const int n_present = s.between(grammar.min_present, grammar.max_present);
    const int n_absent = s.between(grammar.min_absent, grammar.max_absent);

    std::vector<std::string> present;
    std::set<std::string> stems_seen;
    for (int attempt = 0; attempt < 50 && static_cast<int>(present.size()) < n_present; ++attempt) {
      const bool noun_noun = s.index(4) == 0;
      std::string head = s.pick(topic.nouns);
      std::string mod = noun_noun ? s.pick(topic.nouns) : s.pick(topic.modifiers);
      if (mod == head) continue;
      std::string kp = mod + " " + head;
      if (stems_seen.insert(join_stems(kp)).second) present.push_back(std::move(kp));
    }

    std::vector<std::string> sentences;
    for (const auto& kp : present) {
      sentences.push_back(fill_template(s.pick(kp_templates), kp, s, grammar.fillers));
    }
    const int n_filler =
        s.between(grammar.min_filler_sentences, grammar.max_filler_sentences);
    for (int i = 0; i < n_filler; ++i) {
      // Filler sentences mention single topic words so that absent phrases stay
      // inferable from context without appearing verbatim.
      std::string mention = s.pick(topic.nouns);
      const auto& pool = plain_templates.empty() ? kp_templates : plain_templates;
      sentences.push_back(fill_template(s.pick(pool), mention, s, grammar.fillers));
    }
    // Shuffle sentence order deterministically.
    for (std::size_t i = sentences.size(); i > 1; --i) {
      std::swap(sentences[i - 1], sentences[s.index(i)]);
    }
    std::string document;
    for (const auto& sent : sentences) {
      if (!document.empty()) document += ' ';
      document += sent;
    }

    const auto doc_stems = stem_all(tokenize(document));
    bool ok = static_cast<int>(present.size()) >= grammar.min_present;
    for (const auto& kp : present) {
      ok = ok && contains_contiguous(doc_stems, stem_all(tokenize(kp)));
    }

    std::vector<std::string> absent;
    for (int attempt = 0; attempt < 20 && static_cast<int>(absent.size()) < n_absent; ++attempt) {
      const std::string& kp = s.pick(topic.absent_phrases);
      const auto stems = stem_all(tokenize(kp));
      if (contains_contiguous(doc_stems, stems)) continue;
      if (stems_seen.insert(join_stems(kp)).second) absent.push_back(kp);
    }
    ok = ok && static_cast<int>(absent.size()) >= grammar.min_absent;
    if (!ok) continue;

    SyntheticRecord rec;
    rec.document = std::move(document);
    rec.n_present = present.size();
    rec.keyphrases = std::move(present);
    rec.keyphrases.insert(rec.keyphrases.end(), absent.begin(), absent.end());
    out.push_back(std::move(rec));
  }
  return out;
}

std::string synthetic_to_jsonl(const std::vector<SyntheticRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["document"] = r.document;
    j["keyphrases"] = r.keyphrases;
    out += j.dump();
    out += '\n';
  }
  return out;
}

Grammar load_grammar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grammar file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("malformed grammar file " + path.string() + ": " + e.what());
  }
  Grammar g;
  for (const auto& t : j.at("topics")) {
    TopicPool p;
    p.name = t.value("name", std::string{});
    p.nouns = t.at("nouns").get<std::vector<std::string>>();
    p.modifiers = t.at("modifiers").get<std::vector<std::string>>();
    p.absent_phrases = t.at("absent_phrases").get<std::vector<std::string>>();
    g.topics.push_back(std::move(p));
  }
  g.fillers = j.at("fillers").get<std::vector<std::string>>();
  g.templates = j.at("templates").get<std::vector<std::string>>();
  g.min_present = j.value("min_present", g.min_present);
  g.max_present = j.value("max_present", g.max_present);
  g.min_absent = j.value("min_absent", g.min_absent);
  g.max_absent = j.value("max_absent", g.max_absent);
  g.min_filler_sentences = j.value("min_filler_sentences", g.min_filler_sentences);
  g.max_filler_sentences = j.value("max_filler_sentences", g.max_filler_sentences);
  validate(g);
  return g;
}

Grammar default_grammar() {
  Grammar g;
  g.topics = {
      {"imaging",
       {"image", "denoising", "patch", "pixel", "texture", "filter", "noise", "segmentation"},
       {"adaptive", "sparse", "latent", "local", "robust", "fast"},
       {"patch clustering", "image restoration", "signal recovery", "visual prior"}},
      {"topics",
       {"topic", "document", "corpus", "word", "model", "inference", "sampling", "mixture"},
       {"bayesian", "hierarchical", "generative", "probabilistic", "dynamic", "latent"},
       {"semantic learning", "text mining", "dirichlet allocation", "word distribution"}},
      {"networks",
       {"network", "routing", "protocol", "packet", "node", "traffic", "channel", "bandwidth"},
       {"wireless", "mobile", "distributed", "secure", "dynamic", "efficient"},
       {"congestion control", "ad hoc", "sensor deployment", "link quality"}},
      {"databases",
       {"query", "index", "database", "transaction", "join", "schema", "storage", "cache"},
       {"relational", "parallel", "approximate", "efficient", "scalable", "consistent"},
       {"query optimization", "data management", "concurrency control", "cost estimation"}},
      {"learning",
       {"classifier", "kernel", "feature", "margin", "label", "regression", "ensemble", "boosting"},
       {"supervised", "linear", "nonlinear", "robust", "online", "sparse"},
       {"pattern recognition", "model selection", "generalization bound", "active learning"}},
      {"security",
       {"encryption", "key", "attack", "signature", "authentication", "privacy", "cipher", "hash"},
       {"public", "secure", "anonymous", "lightweight", "provable", "distributed"},
       {"access control", "threat model", "intrusion detection", "trust management"}},
      {"graphics",
       {"mesh", "rendering", "shading", "surface", "animation", "geometry", "light", "shape"},
       {"realistic", "interactive", "smooth", "parametric", "volumetric", "fast"},
       {"computer graphics", "level of detail", "global illumination", "shape modeling"}},
      {"robotics",
       {"robot", "motion", "planning", "sensor", "control", "localization", "map", "trajectory"},
       {"autonomous", "mobile", "optimal", "reactive", "cooperative", "visual"},
       {"path finding", "obstacle avoidance", "state estimation", "multi agent"}},
      {"optimization",
       {"solver", "constraint", "objective", "gradient", "algorithm", "bound", "relaxation", "heuristic"},
       {"convex", "stochastic", "combinatorial", "integer", "approximate", "greedy"},
       {"global optimum", "search space", "local search", "complexity analysis"}},
      {"speech",
       {"speech", "acoustic", "phoneme", "speaker", "recognition", "utterance", "spectrum", "decoder"},
       {"continuous", "noisy", "hidden", "neural", "robust", "discriminative"},
       {"language modeling", "voice activity", "audio processing", "markov chain"}},
  };
  g.fillers = {"results", "experiments", "accuracy", "performance", "method", "approach",
               "framework", "system", "benchmark", "datasets", "quality", "efficiency",
               "applications", "evaluation", "baseline", "scenarios", "tasks", "settings",
               "improvement", "analysis", "study", "problem", "design", "implementation"};
  g.templates = {
      "we propose a novel {kp} for {w} .",
      "the {kp} improves {w} and {w} .",
      "this paper studies {kp} in {w} .",
      "our {kp} achieves better {w} .",
      "a new {kp} is presented for {w} {w} .",
      "experiments show that {kp} is effective .",
      "we analyze the {w} of {kp} .",
      "the proposed {w} relies on {kp} .",
      "{kp} is widely used in {w} .",
      "we evaluate {kp} on several {w} .",
  };
  return g;
}

}  // namespace kpset

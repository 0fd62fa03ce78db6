// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "kpset/assignment.hpp"
#include "kpset/checkpoint.hpp"
#include "kpset/config.hpp"
#include "kpset/corpus.hpp"
#include "kpset/diagnostics.hpp"
#include "kpset/losses.hpp"
#include "kpset/metrics.hpp"
#include "kpset/model.hpp"
#include "kpset/reassign.hpp"
#include "kpset/synthetic.hpp"
#include "kpset/textnorm.hpp"
#include "kpset/trainer.hpp"

namespace fs = std::filesystem;
using namespace kpset;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::current_path() / "acceptance_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_synthetic(const std::string& name, std::uint64_t seed, std::size_t size) {
  const fs::path p = work_dir() / name;
  std::ofstream(p, std::ios::binary) << synthetic_to_jsonl(gen_synthetic(seed, size));
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1

Verdict matching_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> cont(-5.0, 5.0);
  std::uniform_int_distribution<int> ints(0, 9);
  std::size_t checked = 0, mismatches = 0;
  for (int n = 2; n <= 7; ++n) {
    for (int trial = 0; trial < 1000; ++trial) {
      CostMatrix c(n, n);
      // alternate continuous and heavily tied matrices
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) c(i, j) = trial % 2 ? cont(rng) : static_cast<double>(ints(rng));
      }
      const auto h = hungarian(c);
      const auto b = brute_force_assign(c);
      if (assignment_total(c, h) != assignment_total(c, b)) ++mismatches;
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          std::to_string(checked) + " matrices, " + std::to_string(mismatches) + " mismatches, " +
              fmt("%.2f s", secs)};
}

// ---------------------------------------------------------------- 2

struct GradInstance {
  Record rec;
  InstancePlan plan;
  double lambda = 1.0;
};

Verdict gradient_check() {
  const auto t0 = Clock::now();
  const Vocabulary vocab = Vocabulary::build(
      {{"topic", "model", "image", "latent", "patch", "clustering", "denoising", "for", "the", "a",
        "semantic", "learning"}});
  auto enc = [&](const std::string& s) { return vocab.encode(tokenize(s)); };
  const Phrase null{special::kNull};

  ModelConfig mc = testing::tiny_config(vocab.size(), 4);
  Model model(mc, 17);
  TrainConfig cfg;
  cfg.model = mc;

  std::vector<GradInstance> insts(2);
  // Instance A exercises re-assignment: slot 1 is potential, slot 2 unimportant.
  {
    GradInstance& g = insts[0];
    g.rec = make_record("a", "a topic model for the latent patch clustering",
                        {"topic model", "latent patch"}, vocab);
    InstancePlan& p = g.plan;
    p.targets.present = {enc("topic model"), std::nullopt};
    p.targets.absent = {enc("latent patch"), std::nullopt};
    p.m.target = {0, 1, 1, 0};
    p.record.vanilla_k = {enc("topic image"), null, enc("latent patch"), enc("latent patch")};
    p.record.nonnull_k = {enc("topic image"), enc("topic model"), enc("latent patch"),
                          enc("latent patch")};
    p.classes = classify_slots(p.record, p.targets, p.m, 2);
    p.plan = reassign(p.m, p.classes, p.targets, p.record, 2);
  }
  // Instance B exercises the adaptive null weighting; its first target word
  // is the one the untrained model finds least likely relative to null.
  {
    GradInstance& g = insts[1];
    g.rec = make_record("b", "semantic learning for image denoising", {}, vocab);
    InstancePlan& p = g.plan;
    p.m.target = {0, 1, 1, 0};
    p.record.vanilla_k = {null, null, null, null};
    p.record.nonnull_k = {enc("for the"), enc("for the"), enc("for the"), enc("for the")};
    double best = 2.0;
    for (const std::string w : {"image", "semantic", "learning", "denoising", "patch", "model"}) {
      InstancePlan trial = p;
      trial.targets.present = {enc(w + " denoising"), std::nullopt};
      trial.targets.absent = {enc("semantic " + w), std::nullopt};
      trial.classes = classify_slots(trial.record, trial.targets, trial.m, 2);
      trial.plan = reassign(trial.m, trial.classes, trial.targets, trial.record, 2);
      const double l =
          instance_loss(model, g.rec, trial, cfg, std::nullopt, 0.0).weighting.lambda_adp;
      if (l < best) {
        best = l;
        g.plan = trial;
      }
    }
  }
  const auto& pa = insts[0].plan;
  if (pa.classes.potential != std::vector<std::size_t>{1} ||
      pa.classes.unimportant != std::vector<std::size_t>{2}) {
    return {false, "fixture did not produce the intended slot classes"};
  }
  if (!insts[1].plan.classes.potential.empty() || !insts[1].plan.classes.unimportant.empty()) {
    return {false, "weighting fixture unexpectedly classified slots"};
  }
  // lambda is detached: evaluate once at the base point, then hold fixed
  for (auto& g : insts) {
    g.lambda = instance_loss(model, g.rec, g.plan, cfg, std::nullopt, 0.0).weighting.lambda_adp;
  }

  auto objective = [&] {
    double total = 0.0;
    for (auto& g : insts) total += instance_loss(model, g.rec, g.plan, cfg, g.lambda, 0.0).loss.total;
    return total;
  };
  model.zero_grad();
  for (auto& g : insts) instance_loss(model, g.rec, g.plan, cfg, g.lambda, 1.0);

  auto& params = model.parameters();
  std::vector<std::pair<std::size_t, Eigen::Index>> entries;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (Eigen::Index e = 0; e < params[i].value.size(); ++e) entries.emplace_back(i, e);
  }
  std::mt19937_64 rng(2024);
  std::shuffle(entries.begin(), entries.end(), rng);
  entries.resize(200);

  const double h = 1e-5;
  double worst = 0.0;
  std::size_t failures = 0, nontrivial = 0;
  for (const auto& [pi, e] : entries) {
    double& w = params[pi].value.data()[e];
    const double saved = w;
    w = saved + h;
    const double up = objective();
    w = saved - h;
    const double down = objective();
    w = saved;
    const double fd = (up - down) / (2.0 * h);
    const double an = params[pi].grad.data()[e];
    const double scale = std::max(std::abs(fd), std::abs(an));
    double rel = 0.0;
    if (scale > 1e-6) {
      rel = std::abs(fd - an) / scale;
      ++nontrivial;
    } else if (std::abs(fd - an) > 1e-9) {
      rel = 1.0;
    }
    worst = std::max(worst, rel);
    if (rel >= 1e-3) ++failures;
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 60.0 && insts[1].lambda < 1.0,
          "lambda_adp " + fmt("%.3f", insts[1].lambda) + ", 200 sampled entries (" +
              std::to_string(nontrivial) + " non-zero), worst rel err " +
              fmt("%.2e", worst) + ", " + std::to_string(failures) + " over 1e-3, " +
              fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------- 3

// Plain set loss with fixed null discounts, computed without the trainer's plan types.
double baseline_objective(const Model& model, const Record& rec, const TrainConfig& cfg) {
  const ad::Matrix memory = model.encode(rec.doc.source_tokens);
  const std::size_t n = cfg.model.n_slots;
  const PaddedTargets targets = pad_targets(drop_overlong(rec.kps, cfg.model.max_tgt_len), n);
  const auto decode = model.predict_k_tokens(memory, cfg.k_steps, DecodeMode::kVanilla);
  const SlotAssignment m = assign_targets(decode.dists, targets, cfg.k_steps, cfg.match_cost);
  std::vector<std::optional<Phrase>> seqs(n);
  for (std::size_t s = 0; s < n; ++s) {
    seqs[s] = target_sequence(targets.side(side_of(s, n)).at(static_cast<std::size_t>(m.target[s])));
  }
  const auto probs = model.teacher_forced_probs(memory, seqs);
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const bool null_target = (*seqs[s])[0] == special::kNull;
    const double w = !null_target ? 1.0 : (side_of(s, n) == 0 ? cfg.lambda_pre : cfg.lambda_abs);
    double lp = 0.0;
    for (double p : probs[s].target_probs) lp += std::log(p);
    loss += -w * lp;
  }
  return loss;
}

Verdict ablation_identity() {
  const fs::path corpus_path = write_synthetic("ablation.jsonl", 7, 120);
  TrainConfig cfg;
  cfg.model.d_model = 16;
  cfg.model.n_heads = 2;
  cfg.model.d_ff = 32;
  cfg.model.enc_layers = 1;
  cfg.model.dec_layers = 1;
  cfg.model.max_src_len = 64;
  cfg.lr = 1e-3;
  cfg.epochs = 20;
  cfg.seed = 3;
  cfg.no_reassign = true;
  cfg.no_weighting = true;
  const Corpus corpus = load_corpus(corpus_path);
  cfg.model.vocab_size = corpus.vocab.size();
  Model model(cfg.model, cfg.seed);

  double worst = 0.0;
  std::int64_t batches = 0;
  TrainHooks hooks;
  hooks.max_steps = 100;
  hooks.on_step = [&](const Model& m, const StepInfo& info) {
    for (std::size_t i = 0; i < info.batch.size(); ++i) {
      const double ref = baseline_objective(m, corpus.records[info.batch[i]], cfg);
      worst = std::max(worst, std::abs(ref - info.instance_losses[i]) / std::max(1.0, std::abs(ref)));
    }
    ++batches;
  };
  train_model(model, corpus, cfg, std::nullopt, hooks);
  return {batches == 100 && worst <= 1e-12,
          std::to_string(batches) + " batches, max deviation " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 4

Verdict lambda_suite() {
  std::vector<std::string> bad;
  auto lam = [](std::vector<WeightInput> in) { return compute_lambda_adp(in).lambda_adp; };
  if (lam({{0, 0.2, 0.4}}) != 0.5) bad.push_back("single slot");
  if (lam({{0, 0.6, 0.1}, {1, 0.3, 0.3}}) != 1.0) bad.push_back("all confident");
  if (lam({{0, 0.1, 0.5}, {1, 0.7, 0.5}}) != 0.6) bad.push_back("two slots");
  if (lam({{0, 0.9, 0.1}}) != 1.0) bad.push_back("clamp");
  if (lam({}) != 1.0) bad.push_back("empty C_!null");
  if (lam({{0, 0.3, 0.0}}) != 1.0) bad.push_back("zero null probability");
  std::string detail = "0.5 / 1.0 / 0.6 plus clamp, empty and zero-null cases";
  for (const auto& b : bad) detail += "; failed: " + b;
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------- 5

struct RandomFixture {
  PaddedTargets targets;
  SlotAssignment m;
  SlotPredictionRecord record;
  std::size_t k = 2;
};

constexpr TokenId kFirstWord = special::kCount;
constexpr int kAlphabet = 5;

RandomFixture random_fixture(std::mt19937_64& rng, std::size_t half, std::size_t k) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  auto word = [&] { return static_cast<TokenId>(kFirstWord + uni(0, kAlphabet - 1)); };
  RandomFixture f;
  f.k = k;
  for (int side = 0; side < 2; ++side) {
    auto& dst = side == 0 ? f.targets.present : f.targets.absent;
    std::set<Phrase> used;
    const int count = uni(0, static_cast<int>(half));
    while (static_cast<int>(used.size()) < count) {
      Phrase p(static_cast<std::size_t>(uni(1, 3)));
      for (auto& t : p) t = word();
      if (used.insert(p).second) dst.emplace_back(p);
    }
    dst.resize(half, std::nullopt);
    std::shuffle(dst.begin(), dst.end(), rng);
    std::vector<int> perm(half);
    for (std::size_t j = 0; j < half; ++j) perm[j] = static_cast<int>(j);
    std::shuffle(perm.begin(), perm.end(), rng);
    f.m.target.insert(f.m.target.end(), perm.begin(), perm.end());
  }
  const std::size_t n = 2 * half;
  auto random_prediction = [&] {
    Phrase p;
    for (std::size_t t = 0; t < k; ++t) p.push_back(coin(0.2) ? special::kEos : word());
    return trim_prediction(p);
  };
  auto random_prefix = [&](int side) -> std::optional<Phrase> {
    const auto& tg = f.targets.side(side);
    std::vector<Phrase> kps;
    for (const auto& t : tg) {
      if (t) kps.push_back(*t);
    }
    if (kps.empty()) return std::nullopt;
    return target_prefix(kps[static_cast<std::size_t>(uni(0, static_cast<int>(kps.size()) - 1))], k);
  };
  for (std::size_t s = 0; s < n; ++s) {
    const int side = side_of(s, n);
    std::optional<Phrase> nonnull;
    if (coin(0.6)) nonnull = random_prefix(side);
    if (!nonnull) nonnull = random_prediction();
    f.record.nonnull_k.push_back(*nonnull);
    Phrase vanilla;
    const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (r < 0.4) {
      vanilla = {special::kNull};
    } else if (r < 0.6) {
      vanilla = *nonnull;
    } else if (r < 0.8) {
      auto other = random_prefix(1 - side);
      vanilla = other ? *other : random_prediction();
    } else {
      vanilla = random_prediction();
    }
    f.record.vanilla_k.push_back(vanilla);
  }
  return f;
}

Verdict reassignment_postconditions() {
  std::mt19937_64 rng(55);
  std::size_t violations = 0, potential = 0, unimportant = 0, grad_checked = 0;
  std::string first_violation;
  auto violate = [&](std::size_t fixture, const std::string& what) {
    if (violations++ == 0) first_violation = "fixture " + std::to_string(fixture) + ": " + what;
  };

  // gradient sub-check: N=6, K=2 on a tiny model
  const std::size_t vocab_size = kFirstWord + kAlphabet;
  ModelConfig mc = testing::tiny_config(vocab_size, 6);
  Model model(mc, 9);
  TrainConfig cfg;
  cfg.model = mc;
  Record rec;
  rec.doc.id = "grad";
  for (int i = 0; i < 12; ++i) rec.doc.source_tokens.push_back(kFirstWord + i % kAlphabet);

  for (std::size_t i = 0; i < 10000; ++i) {
    const bool grad_case = i % 20 == 0;
    const std::size_t half = grad_case ? 3 : static_cast<std::size_t>(1 + rng() % 6);
    const std::size_t k = grad_case ? 2 : static_cast<std::size_t>(1 + rng() % 3);
    const RandomFixture f = random_fixture(rng, half, k);
    const std::size_t n = 2 * half;
    const SlotClasses c = classify_slots(f.record, f.targets, f.m, k);
    const ReassignmentPlan plan = reassign(f.m, c, f.targets, f.record, k);
    potential += c.potential.size();
    unimportant += c.unimportant.size();

    std::set<std::size_t> p(c.potential.begin(), c.potential.end());
    std::set<std::size_t> u(c.unimportant.begin(), c.unimportant.end());
    for (std::size_t s : p) {
      if (u.count(s)) violate(i, "slot in both C_p and C_u");
    }
    for (std::size_t s = 0; s < n; ++s) {
      const auto& side = f.targets.side(side_of(s, n));
      const bool null_assigned = !side.at(static_cast<std::size_t>(f.m.target[s]));
      bool eligible = false;
      for (const auto& t : side) {
        if (t && target_prefix(*t, k) == f.record.nonnull_k[s]) eligible = true;
      }
      const bool classified = p.count(s) || u.count(s);
      if (classified && !null_assigned) violate(i, "keyphrase-assigned slot classified");
      if (classified != (null_assigned && eligible)) violate(i, "classification incomplete");
      if (p.count(s)) {
        const auto& t = side.at(static_cast<std::size_t>(plan.target[s]));
        if (!t || target_prefix(*t, k) != f.record.nonnull_k[s]) {
          violate(i, "re-assigned target prefix differs from the non-null prediction");
        }
      } else if (plan.target[s] != f.m.target[s]) {
        violate(i, "unclassified slot changed target");
      }
      if (plan.masked[s] != (u.count(s) > 0)) violate(i, "mask does not match C_u");
    }

    // loss of masked slots with arbitrary probabilities
    std::mt19937_64 prng(i);
    std::uniform_real_distribution<double> pr(0.01, 0.99);
    const auto seqs = plan.sequences(f.targets);
    std::vector<SlotTeacherProbs> probs(n);
    for (std::size_t s = 0; s < n; ++s) {
      probs[s].null_prob0 = pr(prng);
      if (seqs[s]) {
        for (std::size_t t = 0; t < seqs[s]->size(); ++t) probs[s].target_probs.push_back(pr(prng));
      } else {
        probs[s].masked = true;
      }
    }
    const LossBreakdown lb = set_loss(probs, plan, f.targets, 0.2, 0.1, 0.7);
    double unmasked_sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (plan.masked[s]) {
        if (lb.per_slot[s] != 0.0 || lb.weights[s] != 0.0) violate(i, "masked slot has loss");
      } else {
        unmasked_sum += lb.per_slot[s];
      }
    }
    if (std::abs(unmasked_sum - lb.total) > 1e-12 * std::max(1.0, lb.total)) {
      violate(i, "total differs from the unmasked sum");
    }

    if (grad_case && !c.unimportant.empty()) {
      InstancePlan ip;
      ip.targets = f.targets;
      ip.m = f.m;
      ip.record = f.record;
      ip.classes = c;
      ip.plan = plan;
      model.zero_grad();
      instance_loss(model, rec, ip, cfg, std::nullopt, 1.0);
      const auto& g = model.parameter("ctrl_codes").grad;
      for (std::size_t s = 0; s < n; ++s) {
        const bool zero = g.row(static_cast<Eigen::Index>(s)).isZero(0.0);
        if (plan.masked[s] && !zero) violate(i, "masked slot has a control-code gradient");
        if (!plan.masked[s] && zero) violate(i, "unmasked slot has no control-code gradient");
      }
      ++grad_checked;
    }
  }
  std::string detail = "10000 fixtures, " + std::to_string(potential) + " potential / " +
                       std::to_string(unimportant) + " unimportant slots, " +
                       std::to_string(grad_checked) + " gradient checks, " +
                       std::to_string(violations) + " violations";
  if (violations) detail += " (" + first_violation + ")";
  return {violations == 0 && grad_checked > 0 && potential > 0 && unimportant > 0, detail};
}

// ---------------------------------------------------------------- 6

Verdict figure_fixture() {
  const auto f = testing::figure_instance();
  const SlotClasses c = classify_slots(f.record, f.targets, f.m, f.k);
  const ReassignmentPlan plan = reassign(f.m, c, f.targets, f.record, f.k);
  auto name = [&](std::size_t slot) {
    const auto& t = f.targets.present.at(static_cast<std::size_t>(plan.target[slot]));
    std::string s;
    for (const auto& w : f.vocab.decode(*t)) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  const bool slot3_unimportant = c.unimportant == std::vector<std::size_t>{2} && plan.masked[2];
  const bool potential_ok = c.potential == std::vector<std::size_t>{4, 5};
  const std::string s5 = potential_ok ? name(4) : "?";
  const std::string s6 = potential_ok ? name(5) : "?";
  return {slot3_unimportant && potential_ok && s5 == "patch clustering" && s6 == "denoising",
          std::string("slot3 ") + (slot3_unimportant ? "in C_u" : "NOT in C_u") + ", slot5 -> \"" + s5 +
              "\", slot6 -> \"" + s6 + "\""};
}

// ---------------------------------------------------------------- 7

Verdict metric_suite() {
  using S = std::vector<std::string>;
  std::vector<std::string> bad;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-15; };
  if (f1_at_m({"a", "b"}, {"a", "c"}) != 0.5) bad.push_back("F1@M {a,b}/{a,c}");
  if (f1_at_m({"a", "b", "c"}, {"a", "b", "c"}) != 1.0) bad.push_back("F1@M identical");
  if (f1_at_m({"a", "b"}, {"c", "d"}) != 0.0) bad.push_back("F1@M disjoint");
  if (!near(f1_at_5({"a", "b"}, {"a", "c", "d"}), 0.25)) bad.push_back("F1@5 padded");
  if (f1_at_5({"a", "b", "c", "d", "e"}, {"a", "b", "c", "d", "e"}) != 1.0) bad.push_back("F1@5 all");
  if (!near(f1_at_5(S{"x", "a", "y", "b", "z", "c", "d"}, {"a", "b", "c", "d"}), 4.0 / 9.0)) {
    bad.push_back("F1@5 truncated");
  }
  if (dedup_stemmed({"topic models", "topic model"}) != S{"topic models"}) bad.push_back("dedup");

  std::ifstream in(std::string(KPSET_TEST_DATA) + "/porter_reference.tsv");
  std::size_t words = 0, mismatches = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    ++words;
    if (porter_stem(line.substr(0, tab)) != line.substr(tab + 1)) ++mismatches;
  }
  std::string detail = "F1 examples " + std::string(bad.empty() ? "exact" : "FAILED") + ", Porter " +
                       std::to_string(mismatches) + " mismatches on " + std::to_string(words) + " words";
  for (const auto& b : bad) detail += "; " + b;
  return {bad.empty() && words == 1000 && mismatches == 0, detail};
}

// ---------------------------------------------------------------- 8, 9

struct ToyArm {
  OverestimationCounts over;
  double f1m_present = 0.0;
  std::array<SlotTypeProportions, 2> types{};
};

struct ToyResult {
  std::size_t vocab = 0;
  std::size_t docs = 0;
  double secs = 0.0;
  std::vector<std::uint64_t> seeds;
  std::map<std::uint64_t, ToyArm> base, wr;
};

TrainConfig toy_config(std::uint64_t seed, bool weighted_reassign) {
  TrainConfig cfg;
  cfg.model.d_model = 32;
  cfg.model.n_heads = 2;
  cfg.model.d_ff = 64;
  cfg.model.enc_layers = 1;
  cfg.model.dec_layers = 1;
  cfg.lr = 1e-3;
  cfg.epochs = 20;
  cfg.trace_interval = 42;
  cfg.trace_window = 420;
  cfg.seed = seed;
  cfg.no_reassign = !weighted_reassign;
  cfg.no_weighting = !weighted_reassign;
  return cfg;
}

const ToyResult& toy_experiment() {
  static const ToyResult result = [] {
    const auto t0 = Clock::now();
    ToyResult r;
    r.seeds = {1, 2, 3};
    const fs::path corpus_path = write_synthetic("toy_train.jsonl", 1, 500);
    const Corpus corpus = load_corpus(corpus_path);
    r.vocab = corpus.vocab.size();
    r.docs = corpus.records.size();
    for (std::uint64_t seed : r.seeds) {
      for (bool wr : {false, true}) {
        const fs::path out = work_dir() / ((wr ? "toy_wr" : "toy_base") + std::to_string(seed));
        fs::create_directories(out);
        const TrainResult tr = train(toy_config(seed, wr), corpus_path, out);
        const auto ck = load_checkpoint(out / "model.ckpt");
        ToyArm arm;
        // measured over the whole training corpus
        arm.over = overestimation_ratio(ck.model, ck.vocab, corpus.records, 6);
        arm.f1m_present = evaluate(out / "model.ckpt", corpus_path).present.f1_at_m;
        arm.types = slot_type_proportions(tr.trace);
        (wr ? r.wr : r.base)[seed] = arm;
      }
    }
    r.secs = seconds_since(t0);
    return r;
  }();
  return result;
}

Verdict toy_directional() {
  const ToyResult& r = toy_experiment();
  int wins = 0;
  std::string detail = std::to_string(r.docs) + " docs, vocab " + std::to_string(r.vocab);
  for (std::uint64_t seed : r.seeds) {
    const ToyArm& b = r.base.at(seed);
    const ToyArm& w = r.wr.at(seed);
    const double rb = b.over.ratio().value_or(NAN);
    const double rw = w.over.ratio().value_or(NAN);
    const bool lower = rw <= 0.8 * rb;
    const bool f1_ok = w.f1m_present >= b.f1m_present;
    wins += lower && f1_ok;
    detail += "; seed " + std::to_string(seed) + ": ratio " + fmt("%.3f", rb) + " -> " +
              fmt("%.3f", rw) + ", F1@M(pre) " + fmt("%.4f", b.f1m_present) + " -> " +
              fmt("%.4f", w.f1m_present);
  }
  detail += "; " + std::to_string(wins) + "/3 seeds meet both, " + fmt("%.0f s", r.secs);
  return {wins >= 2 && r.vocab <= 1000 && r.docs >= 500 && r.secs < 1800.0, detail};
}

Verdict slot_type_consistency() {
  const ToyResult& r = toy_experiment();
  bool sums_ok = true;
  int lower = 0;
  std::string detail;
  for (std::uint64_t seed : r.seeds) {
    for (const auto* arms : {&r.base, &r.wr}) {
      for (const auto& t : arms->at(seed).types) {
        if (std::abs(t.null_only + t.keyphrase_only + t.mixed - 1.0) > 1e-12) sums_ok = false;
      }
    }
    const auto& b = r.base.at(seed).types;
    const auto& w = r.wr.at(seed).types;
    const double mb = (b[0].mixed * b[0].count + b[1].mixed * b[1].count) / (b[0].count + b[1].count);
    const double mw = (w[0].mixed * w[0].count + w[1].mixed * w[1].count) / (w[0].count + w[1].count);
    lower += mw < mb;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) +
              ": mixed " + fmt("%.3f", mb) + " -> " + fmt("%.3f", mw);
  }
  detail = std::string("sums ") + (sums_ok ? "= 1" : "!= 1") + "; " + detail + "; WR lower on " +
           std::to_string(lower) + "/3 seeds";
  return {sums_ok && lower >= 2, detail};
}

// ---------------------------------------------------------------- 10

struct PipelineOutput {
  std::string checkpoint, log, eval, diag;
};

PipelineOutput run_pipeline(const fs::path& corpus, const fs::path& out) {
  fs::create_directories(out);
  TrainConfig cfg;
  cfg.model.d_model = 16;
  cfg.model.n_heads = 2;
  cfg.model.d_ff = 32;
  cfg.model.enc_layers = 1;
  cfg.model.dec_layers = 1;
  cfg.lr = 1e-3;
  cfg.epochs = 3;
  cfg.trace_interval = 2;
  cfg.trace_window = 10;
  cfg.seed = 11;
  train(cfg, corpus, out);
  PipelineOutput o;
  o.checkpoint = slurp(out / "model.ckpt");
  o.log = slurp(out / "train_log.jsonl");
  o.eval = report_json(evaluate(out / "model.ckpt", corpus));
  o.diag = diagnose(out / "model.ckpt", out / "train_log.jsonl", corpus).dump(2);
  return o;
}

Verdict determinism() {
  const fs::path corpus = write_synthetic("determinism.jsonl", 5, 80);
  const PipelineOutput a = run_pipeline(corpus, work_dir() / "det_a");
  const PipelineOutput b = run_pipeline(corpus, work_dir() / "det_b");
  std::vector<std::string> differ;
  if (a.checkpoint != b.checkpoint) differ.push_back("checkpoint");
  if (a.log != b.log) differ.push_back("training log");
  if (a.eval != b.eval) differ.push_back("evaluation report");
  if (a.diag != b.diag) differ.push_back("diagnostics report");
  std::string detail = differ.empty() ? "checkpoint, log, evaluation and diagnostics reports identical"
                                      : "differs:";
  for (const auto& d : differ) detail += " " + d;
  return {differ.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"matching oracle equivalence", matching_oracle},
      {"gradient correctness", gradient_check},
      {"ablation identity", ablation_identity},
      {"lambda_adp unit suite", lambda_suite},
      {"re-assignment postconditions", reassignment_postconditions},
      {"worked re-assignment fixture", figure_fixture},
      {"metric suite", metric_suite},
      {"directional toy experiment", toy_directional},
      {"diagnostics consistency", slot_type_consistency},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  [" << id << "] " << criteria[i].first << ": "
              << v.detail << std::endl;
  }
  return failed ? 1 : 0;
}

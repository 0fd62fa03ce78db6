// kpset command line: gen-synthetic, train, evaluate, diagnose.
// KPSET_VERBOSE=0 silences progress output; 2 adds per-step lines.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kpset/config.hpp"
#include "kpset/synthetic.hpp"
#include "kpset/trainer.hpp"

namespace {

int verbosity() {
  const char* v = std::getenv("KPSET_VERBOSE");
  if (!v || !*v) return 1;
  return std::atoi(v);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-based keyphrase generation toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic corpus as JSONL");
  std::uint64_t gen_seed = 1;
  std::size_t gen_size = 500;
  std::string gen_out, gen_grammar;
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--size", gen_size, "Number of documents");
  gen->add_option("--grammar", gen_grammar, "JSON grammar file (default: built-in)");
  gen->add_option("--out,-o", gen_out, "Output path")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_corpus, tr_out;
  std::vector<std::string> tr_sets;
  bool no_reassign = false, no_weighting = false, rand_assign = false;
  tr->add_option("--config,-c", tr_config, "key = value config file");
  tr->add_option("--corpus", tr_corpus, "Training corpus (JSONL)")->required();
  tr->add_option("--out,-o", tr_out, "Output directory")->required();
  tr->add_option("--set", tr_sets, "Override a config key (key=value), repeatable");
  tr->add_flag("--no-reassign", no_reassign, "Disable target re-assignment");
  tr->add_flag("--no-weighting", no_weighting, "Disable adaptive instance-level weighting");
  tr->add_flag("--rand-assign", rand_assign, "Random re-assignment ablation");

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a corpus");
  std::string ev_ckpt, ev_corpus, ev_out;
  bool ev_table = false;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--corpus", ev_corpus, "Evaluation corpus (JSONL)")->required();
  ev->add_option("--out,-o", ev_out, "Write the JSON report here (default stdout)");
  ev->add_flag("--table", ev_table, "Also print an aligned table to stderr");

  auto* dg = app.add_subcommand("diagnose", "Over-estimation and assignment diagnostics");
  std::string dg_ckpt, dg_log, dg_corpus, dg_out, dg_compare;
  kpset::DiagnoseOptions dg_opts;
  dg->add_option("--checkpoint", dg_ckpt, "Checkpoint file")->required();
  dg->add_option("--log", dg_log, "Training log with trace records")->required();
  dg->add_option("--corpus", dg_corpus, "Corpus (usually the training corpus)")->required();
  dg->add_option("--compare-log", dg_compare, "Earlier/baseline log for entropy comparison");
  dg->add_option("--rel-lo", dg_opts.rel_lo, "Reliability interval start");
  dg->add_option("--rel-hi", dg_opts.rel_hi, "Reliability interval end");
  dg->add_option("--rel-width", dg_opts.rel_width, "Reliability bin width");
  dg->add_option("--out,-o", dg_out, "Write the JSON report here (default stdout)");

  CLI11_PARSE(app, argc, argv);
  const int verbose = verbosity();

  try {
    if (*gen) {
      const auto grammar = gen_grammar.empty() ? kpset::default_grammar() : kpset::load_grammar(gen_grammar);
      write_text(gen_out, kpset::synthetic_to_jsonl(kpset::gen_synthetic(gen_seed, gen_size, grammar)));
      if (verbose > 0) std::cerr << "wrote " << gen_size << " documents to " << gen_out << '\n';
    } else if (*tr) {
      kpset::TrainConfig cfg;
      if (!tr_config.empty()) cfg = kpset::load_config(tr_config);
      for (const auto& s : tr_sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
      }
      if (no_reassign) cfg.no_reassign = true;
      if (no_weighting) cfg.no_weighting = true;
      if (rand_assign) cfg.rand_assign = true;
      kpset::TrainHooks hooks;
      if (verbose > 1) hooks.progress = &std::cerr;
      const auto res = kpset::train(cfg, tr_corpus, tr_out, hooks);
      if (verbose > 0) {
        std::cerr << "trained " << res.steps << " steps; final loss "
                  << (res.step_losses.empty() ? 0.0 : res.step_losses.back()) << '\n';
      }
    } else if (*ev) {
      const auto report = kpset::evaluate(ev_ckpt, ev_corpus);
      write_text(ev_out, kpset::report_json(report) + "\n");
      if (ev_table || verbose > 1) std::cerr << kpset::report_table(report);
    } else if (*dg) {
      if (!dg_compare.empty()) dg_opts.compare_log = dg_compare;
      const auto report = kpset::diagnose(dg_ckpt, dg_log, dg_corpus, dg_opts);
      for (const auto& note : report["omitted"]) {
        if (verbose > 0) std::cerr << "notice: " << note.get<std::string>() << '\n';
      }
      write_text(dg_out, report.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include "kpset/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kpset {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

std::string fmt(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

std::string fmt(bool b) { return b ? "true" : "false"; }

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "n_slots",     "k_steps",     "lambda_pre",    "lambda_abs",   "match_cost",
      "d_model",     "n_heads",     "d_ff",          "enc_layers",   "dec_layers",
      "max_src_len", "max_tgt_len", "vocab_size",    "lr",           "beta1",
      "beta2",       "adam_eps",    "batch_size",    "epochs",       "seed",
      "no_reassign", "no_weighting", "rand_assign",  "trace_interval", "trace_window",
      "max_gen_len"};
  return keys;
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "n_slots") model.n_slots = to_size(key, v);
  else if (key == "k_steps") k_steps = to_size(key, v);
  else if (key == "lambda_pre") lambda_pre = to_double(key, v);
  else if (key == "lambda_abs") lambda_abs = to_double(key, v);
  else if (key == "match_cost") {
    if (v == "prob") match_cost = MatchCostKind::kProb;
    else if (v == "logprob") match_cost = MatchCostKind::kLogProb;
    else throw std::invalid_argument("config: match_cost expects prob or logprob");
  }
  else if (key == "d_model") model.d_model = to_size(key, v);
  else if (key == "n_heads") model.n_heads = to_size(key, v);
  else if (key == "d_ff") model.d_ff = to_size(key, v);
  else if (key == "enc_layers") model.enc_layers = to_size(key, v);
  else if (key == "dec_layers") model.dec_layers = to_size(key, v);
  else if (key == "max_src_len") model.max_src_len = to_size(key, v);
  else if (key == "max_tgt_len") model.max_tgt_len = to_size(key, v);
  else if (key == "vocab_size") model.vocab_size = to_size(key, v);
  else if (key == "lr") lr = to_double(key, v);
  else if (key == "beta1") beta1 = to_double(key, v);
  else if (key == "beta2") beta2 = to_double(key, v);
  else if (key == "adam_eps") adam_eps = to_double(key, v);
  else if (key == "batch_size") batch_size = to_size(key, v);
  else if (key == "epochs") epochs = to_size(key, v);
  else if (key == "seed") seed = to_size(key, v);
  else if (key == "no_reassign") no_reassign = to_bool(key, v);
  else if (key == "no_weighting") no_weighting = to_bool(key, v);
  else if (key == "rand_assign") rand_assign = to_bool(key, v);
  else if (key == "trace_interval") trace_interval = to_size(key, v);
  else if (key == "trace_window") trace_window = to_size(key, v);
  else if (key == "max_gen_len") max_gen_len = to_size(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::items() const {
  return {
      {"n_slots", std::to_string(model.n_slots)},
      {"k_steps", std::to_string(k_steps)},
      {"lambda_pre", fmt(lambda_pre)},
      {"lambda_abs", fmt(lambda_abs)},
      {"match_cost", match_cost == MatchCostKind::kProb ? "prob" : "logprob"},
      {"d_model", std::to_string(model.d_model)},
      {"n_heads", std::to_string(model.n_heads)},
      {"d_ff", std::to_string(model.d_ff)},
      {"enc_layers", std::to_string(model.enc_layers)},
      {"dec_layers", std::to_string(model.dec_layers)},
      {"max_src_len", std::to_string(model.max_src_len)},
      {"max_tgt_len", std::to_string(model.max_tgt_len)},
      {"vocab_size", std::to_string(model.vocab_size)},
      {"lr", fmt(lr)},
      {"beta1", fmt(beta1)},
      {"beta2", fmt(beta2)},
      {"adam_eps", fmt(adam_eps)},
      {"batch_size", std::to_string(batch_size)},
      {"epochs", std::to_string(epochs)},
      {"seed", std::to_string(seed)},
      {"no_reassign", fmt(no_reassign)},
      {"no_weighting", fmt(no_weighting)},
      {"rand_assign", fmt(rand_assign)},
      {"trace_interval", std::to_string(trace_interval)},
      {"trace_window", std::to_string(trace_window)},
      {"max_gen_len", std::to_string(max_gen_len)},
  };
}

void TrainConfig::validate() const {
  model.validate();
  if (k_steps == 0) throw std::invalid_argument("config: k_steps must be at least 1");
  if (!(lambda_pre >= 0.0) || !(lambda_abs >= 0.0)) {
    throw std::invalid_argument("config: lambda_pre and lambda_abs must be non-negative");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (batch_size == 0) throw std::invalid_argument("config: batch_size must be positive");
  if (no_reassign && rand_assign) {
    throw std::invalid_argument("config: rand_assign and no_reassign are mutually exclusive");
  }
  if (max_gen_len == 0) throw std::invalid_argument("config: max_gen_len must be positive");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const TrainConfig& c) {
  std::string out;
  for (const auto& [k, v] : c.items()) out += k + " = " + v + "\n";
  return out;
}

}  // namespace kpset

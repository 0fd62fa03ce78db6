#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "kpset/assignment.hpp"
#include "kpset/losses.hpp"
#include "kpset/model.hpp"

namespace kpset {

/// Training settings. Stored as flat `key = value` text; see config_keys().
struct TrainConfig {
  ModelConfig model;
  std::size_t k_steps = 2;
  double lambda_pre = kDefaultLambdaPre;
  double lambda_abs = kDefaultLambdaAbs;
  MatchCostKind match_cost = MatchCostKind::kProb;

  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.998;
  double adam_eps = 1e-9;
  std::size_t batch_size = 12;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;

  bool no_reassign = false;
  bool no_weighting = false;
  bool rand_assign = false;

  std::size_t trace_interval = 50;
  std::size_t trace_window = 1000;
  std::size_t max_gen_len = 6;

  bool operator==(const TrainConfig&) const = default;

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;

  /// Applies one `key=value` assignment; throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// All keys with their current values in schema order.
  std::vector<std::pair<std::string, std::string>> items() const;
};

/// Key names in schema order.
const std::vector<std::string>& config_keys();

/// Parses `key = value` lines; `#` starts a comment. Unset keys keep defaults.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
std::string format_config(const TrainConfig& c);

}  // namespace kpset

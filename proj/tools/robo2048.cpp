// Copyright 2026 The robo2048 Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Every subcommand takes --config, --seed and --out;
// --set key=value overrides single config entries.

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "robo2048/harness.hpp"

namespace h = robo2048::harness;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

h::RunConfig resolve(const Common& c) {
  h::RunConfig cfg = c.config.empty() ? h::RunConfig{} : h::RunConfig::load(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw h::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  return cfg;
}

std::string one_line(std::string s) {
  for (auto& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robo2048: learning, perception and actuation for a 2048-playing arm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", h::kVersion);

  Common common;
  std::function<void(h::RunConfig&, const h::Output&)> action;

  auto add = [&](const std::string& name, const std::string& help, auto fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", common.config, "config file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "master seed");
    sub->add_option("--out", common.out, "output directory")->required();
    sub->add_option("--set", common.overrides, "override a config key (key=value)");
    sub->callback([&action, fn] {
      action = [fn](h::RunConfig& cfg, const h::Output& out) { fn(cfg, out); };
    });
  };

  add("baseline-random", "uniform random policy statistics", [](h::RunConfig& cfg, const h::Output& out) {
    const auto s = h::cmd_baseline_random(cfg, out);
    std::cout << "reach128 " << s.reach_rate(7) << "% reach256 " << s.reach_rate(8) << "%\n";
  });
  add("train-dqn", "train the Q-network", [](h::RunConfig& cfg, const h::Output& out) {
    const auto s = h::cmd_train_dqn(cfg, out);
    std::cout << "episodes " << s.episodes.size() << '\n';
  });
  add("eval-dqn", "evaluate a Q-network checkpoint greedily", [](h::RunConfig& cfg, const h::Output& out) {
    const auto s = h::cmd_eval_dqn(cfg, out);
    std::cout << "reach128 " << s.reach_rate(7) << "% reach256 " << s.reach_rate(8) << "%\n";
  });
  add("play-e2e", "clean versus perception-in-the-loop play", [](h::RunConfig& cfg, const h::Output& out) {
    const auto r = h::cmd_play_e2e(cfg, out);
    std::cout << "reach128 gap " << r.rate_difference(7) << "pp reach256 gap " << r.rate_difference(8) << "pp\n";
  });
  add("optimize-swipes", "iLQR swipe trajectories", [](h::RunConfig& cfg, const h::Output& out) {
    const auto s = h::cmd_optimize_swipes(cfg, out);
    std::cout << "optimized " << s.size() << " swipes\n";
  });
  add("train-digits", "train the tile classifier", [](h::RunConfig& cfg, const h::Output& out) {
    const auto r = h::cmd_train_digits(cfg, out);
    std::cout << "test accuracy " << 100.0 * r.confusion.accuracy() << "%\n";
  });
  add("eval-digits", "held-out accuracy and read-back rate", [](h::RunConfig& cfg, const h::Output& out) {
    const auto r = h::cmd_eval_digits(cfg, out);
    std::cout << "test accuracy " << 100.0 * r.confusion.accuracy() << "% round trip " << 100.0 * r.round_trip_rate
              << "%\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    h::RunConfig cfg = resolve(common);
    const h::Output out(common.out);
    action(cfg, out);
  } catch (const h::ConfigError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

// explore: run, batch and compare exploration episodes.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "explo/mission.hpp"

namespace {

using namespace explo;
using mission::ConfigError;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitEpisode = 3;

mission::ScenarioConfig configure(const std::string& path, std::optional<std::uint64_t> seed,
                                  const std::string& mode) {
  auto cfg = mission::load_config(path);
  if (seed) cfg = cfg.with_seed(*seed);
  if (!mode.empty()) {
    try {
      cfg.explore.mode = explore::parse_mode(mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void print_summary(const mission::EpisodeSummary& s, const std::string& dir) {
  std::printf("seed=%llu mode=%s termination=%s goals=%d coverage=%.4f heading=%.4f path=%.2f t=%.2f -> %s\n",
              static_cast<unsigned long long>(s.seed), s.mode.c_str(), s.termination.c_str(), s.goals,
              s.reachable_coverage, s.heading_change, s.path_length, s.sim_time, dir.c_str());
}

/// Runs one episode and writes its artifacts; returns an exit code.
int run_one(const mission::ScenarioConfig& cfg, const std::string& out) {
  try {
    const auto result = mission::run_episode(cfg);
    mission::export_artifacts(result, cfg, out);
    const auto s = mission::summarize(result, cfg);
    print_summary(s, out);
    return result.metrics.termination == mission::Termination::Failure ? kExitEpisode : kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "episode failed (seed %llu): %s\n", static_cast<unsigned long long>(cfg.seed), e.what());
    return kExitEpisode;
  }
}

std::pair<std::uint64_t, std::uint64_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoull(text);
      return {v, v};
    }
    const auto a = std::stoull(text.substr(0, dots));
    const auto b = std::stoull(text.substr(dots + 2));
    if (b < a) throw ConfigError("empty seed range " + text);
    return {a, b};
  } catch (const std::logic_error&) {
    throw ConfigError("bad seed range '" + text + "', expected a..b");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frontier exploration simulator"};
  app.require_subcommand(1);

  std::string config, out, mode, seeds;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run one episode");
  run->add_option("--config", config, "scenario JSON")->required();
  run->add_option("--out", out, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "episode seed (overrides the config)");
  run->add_option("--mode", mode, "baseline | direction")->check(CLI::IsMember({"baseline", "direction"}));

  auto* batch = app.add_subcommand("batch", "run both modes over a seed range");
  batch->add_option("--config", config, "scenario JSON")->required();
  batch->add_option("--seeds", seeds, "inclusive range a..b")->required();
  batch->add_option("--out", out, "output directory")->required();

  auto* compare = app.add_subcommand("compare", "tabulate baseline vs direction");
  compare->add_option("--out", out, "batch output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*run) {
    mission::ScenarioConfig cfg;
    try {
      cfg = configure(config, seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, mode);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return kExitConfig;
    }
    return run_one(cfg, out);
  }

  if (*batch) {
    mission::ScenarioConfig base;
    std::pair<std::uint64_t, std::uint64_t> range;
    try {
      base = configure(config, std::nullopt, "");
      range = parse_range(seeds);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return kExitConfig;
    }
    struct Job {
      mission::ScenarioConfig cfg;
      std::string dir;
    };
    std::vector<Job> jobs;
    for (auto s = range.first; s <= range.second; ++s)
      for (const auto m : {explore::RevenueMode::Baseline, explore::RevenueMode::Direction}) {
        auto c = base.with_seed(s);
        c.explore.mode = m;
        const auto dir = std::filesystem::path(out) / explore::to_string(m) / ("seed_" + std::to_string(s));
        jobs.push_back({std::move(c), dir.string()});
      }
    std::vector<int> codes(jobs.size(), kExitOk);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t i = 0; i < jobs.size(); ++i) codes[i] = run_one(jobs[i].cfg, jobs[i].dir);
    int rc = kExitOk;
    for (int c : codes) rc = std::max(rc, c);
    if (rc == kExitOk || rc == kExitEpisode) {
      try {
        std::cout << mission::compare_runs(out);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "compare failed: %s\n", e.what());
        return kExitEpisode;
      }
    }
    return rc;
  }

  if (*compare) {
    try {
      std::cout << mission::compare_runs(out);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "compare failed: %s\n", e.what());
      return kExitConfig;
    }
    return kExitOk;
  }
  return kExitOk;
}

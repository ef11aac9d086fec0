// sr3 run <experiment> [--config FILE] [--out DIR] [--seed N] [--paper-scale]
// sr3 list
// sr3 verify [--criterion N]

#include <sr3/experiments.hpp>
#include <sr3/verify.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

namespace ex = sr3::experiments;

int main(int argc, char** argv) {
  CLI::App app{"Sparse relaxed regularized regression experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one experiment and write <name>.csv and plots");
  std::string experiment, config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool paper_scale = false;
  run->add_option("experiment", experiment, "Experiment name (see `sr3 list`)")->required();
  run->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Base seed");
  run->add_flag("--paper-scale", paper_scale, "Use the full-size problem dimensions");

  auto* list = app.add_subcommand("list", "List experiments");

  auto* verify = app.add_subcommand("verify", "Run the acceptance checks");
  std::vector<int> criteria;
  verify->add_option("--criterion", criteria, "Only these criteria (1-13)")->check(CLI::Range(1, 13));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& e : ex::registry()) std::printf("%-18s %s\n", e.name.c_str(), e.figure.c_str());
      return 0;
    }
    if (*run) {
      const auto* e = ex::find_experiment(experiment);
      if (!e) {
        std::cerr << "unknown experiment '" << experiment << "'; try `sr3 list`\n";
        return 1;
      }
      auto cfg = config_path.empty() ? ex::Config{} : ex::Config::from_file(config_path);
      if (seed) cfg.set("seed", std::to_string(*seed));
      if (paper_scale) cfg.set("paper_scale", "true");
      for (const auto& path : ex::run_and_write(*e, cfg, out_dir)) std::cout << "wrote " << path << '\n';
      return 0;
    }
    if (*verify) {
      if (criteria.empty())
        for (int i = 1; i <= 13; ++i) criteria.push_back(i);
      bool all = true;
      for (const int id : criteria) {
        const auto r = sr3::verify::run_criterion(id);
        std::cout << sr3::verify::format_line(r) << std::endl;
        all = all && r.passed;
      }
      return all ? 0 : 2;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}

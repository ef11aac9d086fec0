#pragma once

// Experiment runners.  Each takes the merged configuration for its section
// and returns a result table whose rows carry the experiment name, the seed
// and every parameter used.  Desk-scale dimensions are the defaults;
// paper_scale = true switches to the larger settings.

#include <sr3/harness.hpp>
#include <sr3/prox.hpp>
#include <sr3/types.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace sr3::experiments {

using harness::Config;
using harness::PlotSpec;
using harness::ResultTable;

/// mix_seed(mix_seed(base, stream_id(experiment)), trial).
std::uint64_t trial_seed(std::uint64_t base, std::string_view experiment, long trial);

/// `count` log-spaced values from lambda_max down to min_ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, long count, double min_ratio);

/// Smallest lambda for which the scalar prox with weight eta * lambda maps
/// eta * g to zero, i.e. where zero becomes a fixed point of a prox-gradient
/// step whose gradient at zero has magnitude g.  Singular-value penalties use
/// their inner scalar penalty.
double zero_lambda(const prox::Regularizer& reg, double g, double eta);

ResultTable run_lasso_path(const Config& cfg);
ResultTable run_noise_f1(const Config& cfg);
ResultTable run_iters_vs_cond(const Config& cfg);
ResultTable run_cs_recovery(const Config& cfg);
ResultTable run_analysis_demo(const Config& cfg);
ResultTable run_tv_deblur(const Config& cfg);
ResultTable run_tv1d(const Config& cfg);
ResultTable run_completion_pareto(const Config& cfg);
ResultTable run_group_sparsity(const Config& cfg);

struct Plot {
  /// Appended to the experiment name to form the file name.
  std::string suffix;
  PlotSpec spec;
};

struct Experiment {
  std::string name;
  /// The figure this experiment reproduces.
  std::string figure;
  std::function<ResultTable(const Config&)> run;
  std::vector<Plot> plots;
};

const std::vector<Experiment>& registry();
/// nullptr for unknown names.
const Experiment* find_experiment(std::string_view name);

/// Runs the experiment with cfg.section(name) and writes <name>.csv plus
/// <name><suffix>.svg per plot into out_dir (created when missing).  Returns the paths.
std::vector<std::string> run_and_write(const Experiment& experiment, const Config& cfg, const std::string& out_dir);

}  // namespace sr3::experiments

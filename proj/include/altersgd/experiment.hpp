#pragma once

#include "altersgd/continual.hpp"
#include "altersgd/losses.hpp"
#include "altersgd/model.hpp"
#include "altersgd/optimizer.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace altersgd {

enum class TaskKind { Quadratic, DoubleWell, SplitBlobs };

/// Anchor weights for continual sessions: `Sum` uses unit weights, `Mean`
/// uses 1/P so the anchor is the mean squared drift over all P parameters.
enum class AnchorNormalization { Sum, Mean };

struct SweepAxis {
    std::string key;
    std::vector<double> values;

    bool operator==(const SweepAxis &) const = default;
};

struct GridAxis {
    double lo = -5.0;
    double hi = 5.0;
    std::size_t points = 1001;

    bool operator==(const GridAxis &) const = default;
};

/// Everything one invocation of the CLI needs. Defaults follow the
/// segmentation protocol scaled down to 2-D blobs: p = 25/30, lambda_reg = 100,
/// 30 epochs per session, learning rate 0.01 initially and 0.001 afterwards.
struct ExperimentConfig {
    TaskKind task = TaskKind::SplitBlobs;
    OptimizerKind optimizer = OptimizerKind::AlterSgd;

    std::size_t iterations = 2000;  // analytic tasks
    std::size_t epochs_initial = 30;
    std::size_t epochs_continual = 30;
    double p = 25.0 / 30.0;
    double p_initial = 1.0;  // session 0 is plain training for every optimizer
    double lr_initial = 0.01;
    double lr_continual = 0.001;
    double lambda_reg = 100.0;
    std::optional<double> lambda_a;
    std::optional<double> lambda_b;
    std::size_t batch_size = 32;
    PairBatchMode pair_batch_mode = PairBatchMode::SameBatch;
    double gradient_noise_std = 0.0;

    std::size_t num_sessions = 4;
    std::size_t initial_classes = 4;
    std::size_t classes_per_session = 1;
    std::size_t samples_per_class = 200;
    std::vector<std::size_t> hidden_layers{128};
    Activation activation = Activation::Tanh;
    bool label_masking = true;
    AnchorNormalization anchor_normalization = AnchorNormalization::Mean;

    std::vector<double> quadratic_diag{1.0, 4.0};
    std::vector<double> dw_centers{-2.0, 2.0};
    std::vector<double> dw_depths{1.0, 1.0};
    std::vector<double> dw_widths{1.5, 0.3};
    std::vector<double> initial_point;  // empty: task default
    double initial_spread = 0.0;

    double flatness_rho = 0.05;
    std::size_t flatness_draws = 128;

    std::vector<GridAxis> grid{GridAxis{}};
    std::vector<double> theorem1_etas{0.02, 0.04, 0.08};

    std::optional<SweepAxis> sweep;
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = "results";
    std::size_t jobs = 1;

    bool operator==(const ExperimentConfig &) const = default;
};

/// Parses a JSON object of `key: value` pairs. Missing keys keep their
/// defaults; an empty document yields the defaults. Throws ConfigError naming
/// the first offending key.
[[nodiscard]] ExperimentConfig parse_config(std::string_view text);
[[nodiscard]] std::string serialize_config(const ExperimentConfig &cfg);
[[nodiscard]] nlohmann::json config_to_json(const ExperimentConfig &cfg);

/// Sets one numeric field by name (used by sweeps and command-line overrides).
void apply_setting(ExperimentConfig &cfg, const std::string &key, const nlohmann::json &value);
[[nodiscard]] std::vector<std::string> sweepable_keys();

/// Accepts decimals and fractions such as "25/30".
[[nodiscard]] double parse_real(std::string_view text);
/// "key=v1,v2,..." as accepted by --sweep.
[[nodiscard]] SweepAxis parse_sweep(std::string_view text);

void validate_config(const ExperimentConfig &cfg);

/// One (sweep value, seed) combination.
struct RunSpec {
    std::size_t sweep_index = 0;
    std::optional<double> sweep_value;
    std::uint64_t seed = 0;
    ExperimentConfig config;
    std::filesystem::path directory;
};

[[nodiscard]] std::vector<RunSpec> expand_runs(const ExperimentConfig &cfg);

/// Outcome metrics of one run, keyed by name (see README for the list).
struct RunOutcome {
    nlohmann::json metrics;
};

/// Executes a single run, writing runs.csv (and accuracy.csv for split_blobs)
/// into `spec.directory`.
RunOutcome execute_run(const RunSpec &spec);

/// Runs every combination (up to cfg.jobs at once), then writes summary.json.
/// Returns 0 when every run completed, 1 otherwise (failures.json lists them).
int run_experiment(const ExperimentConfig &cfg);

/// Builds the analytic loss a config describes (quadratic or double_well).
[[nodiscard]] std::unique_ptr<LossOracle> make_analytic_loss(const ExperimentConfig &cfg);
[[nodiscard]] ParamVector initial_point(const ExperimentConfig &cfg, std::size_t dim, std::uint64_t seed);

/// CSV of `theta_0[,theta_1],loss,grad_norm` over a 1-D or 2-D grid.
void emit_landscape_grid(const LossOracle &loss, const std::vector<GridAxis> &grid, std::ostream &out);
int emit_landscape_grid(const ExperimentConfig &cfg, const std::filesystem::path &out);

/// Writes theorem1.json for the configured task at its initial point.
int run_theorem1(const ExperimentConfig &cfg);

[[nodiscard]] std::string_view to_string(TaskKind kind) noexcept;
[[nodiscard]] std::string_view to_string(OptimizerKind kind) noexcept;
[[nodiscard]] std::string_view to_string(AnchorNormalization kind) noexcept;

}  // namespace altersgd

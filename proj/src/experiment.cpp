#include "altersgd/experiment.hpp"

#include "altersgd/errors.hpp"
#include "altersgd/format.hpp"
#include "altersgd/landscape.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace altersgd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(const std::vector<double> &xs) {
    MeanStd out;
    if (xs.empty()) {
        return out;
    }
    for (double x : xs) {
        out.mean += x;
    }
    out.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - out.mean) * (x - out.mean);
        }
        out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return out;
}

std::string format_value(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

ScheduleConfig analytic_schedule(const ExperimentConfig &cfg) {
    ScheduleConfig s;
    s.total_iterations = cfg.iterations;
    s.alternative_ratio = cfg.optimizer == OptimizerKind::PlainSgd ? 1.0 : cfg.p;
    s.learning_rate = cfg.lr_initial;
    s.batch_size = cfg.batch_size;
    s.pair_batch_mode = cfg.pair_batch_mode;
    return s;
}

std::pair<ScheduleConfig, ScheduleConfig> continual_schedules(const ExperimentConfig &cfg) {
    ScheduleConfig initial;
    initial.epochs = cfg.epochs_initial;
    initial.alternative_ratio = cfg.p_initial;
    initial.learning_rate = cfg.lr_initial;
    initial.batch_size = cfg.batch_size;
    initial.pair_batch_mode = cfg.pair_batch_mode;

    ScheduleConfig continual = initial;
    continual.epochs = cfg.epochs_continual;
    continual.alternative_ratio = cfg.p;
    continual.learning_rate = cfg.lr_continual;
    continual.lambda_reg = cfg.lambda_reg;
    continual.lambda_a = cfg.lambda_a;
    continual.lambda_b = cfg.lambda_b;
    return {initial, continual};
}

json run_analytic(const ExperimentConfig &cfg, std::uint64_t seed, RecordSink &log) {
    const auto loss = make_analytic_loss(cfg);
    const NoisyGradientLoss noisy(*loss, cfg.gradient_noise_std, mix_seed(seed, 0xA0153));
    const ParamVector theta0 = initial_point(cfg, loss->dim(), seed);
    const ParamVector final_point = run_session(noisy, nullptr, theta0, analytic_schedule(cfg), seed, log);
    const BatchRef none;
    const FlatnessReport flat =
        flatness_report(*loss, final_point, none, cfg.flatness_rho, cfg.flatness_draws, mix_seed(seed, 0xF1A7));
    json metrics = flat;
    metrics["final_loss"] = loss->evaluate(final_point, none).value;
    metrics["initial_point"] = theta0.values();
    return metrics;
}

json run_blobs(const ExperimentConfig &cfg, std::uint64_t seed, RecordSink &log, const fs::path &dir) {
    std::vector<std::size_t> counts(cfg.num_sessions, cfg.classes_per_session);
    counts[0] = cfg.initial_classes;
    const SessionSequence seq =
        make_split_blobs(counts, cfg.samples_per_class, seed, cfg.hidden_layers, cfg.activation);
    const auto [initial, continual] = continual_schedules(cfg);
    ContinualOptions options{cfg.label_masking, {}};
    if (cfg.anchor_normalization == AnchorNormalization::Mean) {
        const std::size_t count = seq.shared_spec.parameter_count();
        options.anchor_weights = ParamVector(count, 1.0 / static_cast<double>(count));
    }
    const ContinualResult result = run_continual(seq, initial, continual, cfg.optimizer, seed, log, options);

    std::ofstream acc_out(dir / "accuracy.csv");
    result.accuracy.write_csv(acc_out);

    const std::size_t last = seq.sessions() - 1;
    json metrics;
    double final_mean = 0.0;
    std::vector<double> forgets;
    for (std::size_t i = 0; i <= last; ++i) {
        final_mean += *result.accuracy.at(i, last);
        if (i < last) {
            forgets.push_back(forgetting(result.accuracy, i));
        }
    }
    metrics["final_accuracy"] = final_mean / static_cast<double>(seq.sessions());
    metrics["first_task_final_accuracy"] = *result.accuracy.at(0, last);
    metrics["last_task_accuracy"] = *result.accuracy.at(last, last);
    if (!forgets.empty()) {
        metrics["first_task_forgetting"] = forgetting(result.accuracy, 0);
        metrics["mean_forgetting"] = mean_std(forgets).mean;
    }
    return metrics;
}

}  // namespace

std::unique_ptr<LossOracle> make_analytic_loss(const ExperimentConfig &cfg) {
    switch (cfg.task) {
        case TaskKind::Quadratic:
            return std::make_unique<QuadraticLoss>(QuadraticLoss::diagonal(cfg.quadratic_diag));
        case TaskKind::DoubleWell: {
            DoubleWellLoss::Params p;
            for (int k = 0; k < 2; ++k) {
                p.centers[k] = cfg.dw_centers[k];
                p.depths[k] = cfg.dw_depths[k];
                p.widths[k] = cfg.dw_widths[k];
            }
            return std::make_unique<DoubleWellLoss>(p);
        }
        case TaskKind::SplitBlobs:
            break;
    }
    throw ContractViolation("make_analytic_loss: split_blobs is not an analytic task");
}

ParamVector initial_point(const ExperimentConfig &cfg, std::size_t dim, std::uint64_t seed) {
    ParamVector theta(dim, cfg.task == TaskKind::Quadratic ? 1.0 : 0.0);
    if (!cfg.initial_point.empty()) {
        require(cfg.initial_point.size() == dim, "initial_point has the wrong dimension for the task");
        theta = ParamVector(cfg.initial_point);
    }
    if (cfg.initial_spread > 0.0) {
        std::mt19937_64 rng(mix_seed(seed, 0x1417));
        std::uniform_real_distribution<double> u(-cfg.initial_spread, cfg.initial_spread);
        for (double &x : theta) {
            x += u(rng);
        }
    }
    return theta;
}

std::vector<RunSpec> expand_runs(const ExperimentConfig &cfg) {
    std::vector<RunSpec> runs;
    const fs::path root(cfg.output_dir);
    const std::size_t values = cfg.sweep ? cfg.sweep->values.size() : 1;
    for (std::size_t v = 0; v < values; ++v) {
        for (std::uint64_t seed : cfg.seeds) {
            RunSpec spec;
            spec.sweep_index = v;
            spec.seed = seed;
            spec.config = cfg;
            spec.config.sweep.reset();
            std::string name = "run_" + std::to_string(v);
            if (cfg.sweep) {
                spec.sweep_value = cfg.sweep->values[v];
                apply_setting(spec.config, cfg.sweep->key, json(*spec.sweep_value));
                name += "_" + cfg.sweep->key + "_" + format_value(*spec.sweep_value);
            }
            spec.directory = root / (name + "_seed_" + std::to_string(seed));
            runs.push_back(std::move(spec));
        }
    }
    return runs;
}

RunOutcome execute_run(const RunSpec &spec) {
    fs::create_directories(spec.directory);
    std::ofstream runs_csv(spec.directory / "runs.csv");
    CsvSink sink(runs_csv);
    RunOutcome outcome;
    if (spec.config.task == TaskKind::SplitBlobs) {
        outcome.metrics = run_blobs(spec.config, spec.seed, sink, spec.directory);
    } else {
        outcome.metrics = run_analytic(spec.config, spec.seed, sink);
    }
    json run_doc{{"seed", spec.seed}, {"config", config_to_json(spec.config)}, {"metrics", outcome.metrics}};
    if (spec.sweep_value) {
        run_doc["sweep_value"] = *spec.sweep_value;
    }
    std::ofstream(spec.directory / "run.json") << run_doc.dump(2) << '\n';
    return outcome;
}

int run_experiment(const ExperimentConfig &cfg) {
    validate_config(cfg);
    const std::vector<RunSpec> runs = expand_runs(cfg);
    fs::create_directories(cfg.output_dir);

    std::vector<std::optional<RunOutcome>> outcomes(runs.size());
    std::vector<std::string> errors(runs.size());

#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(cfg.jobs)) default(none) \
    shared(runs, outcomes, errors)
    for (std::size_t i = 0; i < runs.size(); ++i) {
        try {
            outcomes[i] = execute_run(runs[i]);
        } catch (const std::exception &e) {
            errors[i] = e.what();
        }
    }

    // Aggregate per sweep value, in sweep order.
    std::map<std::size_t, std::map<std::string, std::vector<double>>> per_value;
    std::map<std::size_t, std::size_t> completed;
    json failures = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (!outcomes[i]) {
            failures.push_back({{"directory", runs[i].directory.string()},
                                {"seed", runs[i].seed},
                                {"sweep_value", runs[i].sweep_value ? json(*runs[i].sweep_value) : json(nullptr)},
                                {"error", errors[i]}});
            continue;
        }
        ++completed[runs[i].sweep_index];
        for (const auto &[key, value] : outcomes[i]->metrics.items()) {
            if (value.is_number()) {
                per_value[runs[i].sweep_index][key].push_back(value.get<double>());
            }
        }
    }

    json rows = json::array();
    const std::size_t values = cfg.sweep ? cfg.sweep->values.size() : 1;
    for (std::size_t v = 0; v < values; ++v) {
        json row{{"value", cfg.sweep ? json(cfg.sweep->values[v]) : json(nullptr)},
                 {"runs", cfg.seeds.size()},
                 {"completed", completed[v]}};
        for (const auto &[key, xs] : per_value[v]) {
            const MeanStd ms = mean_std(xs);
            row[key + "_mean"] = ms.mean;
            row[key + "_std"] = ms.std;
        }
        rows.push_back(std::move(row));
    }
    json summary{{"task", std::string(to_string(cfg.task))},
                 {"optimizer", std::string(to_string(cfg.optimizer))},
                 {"sweep_key", cfg.sweep ? json(cfg.sweep->key) : json(nullptr)},
                 {"seeds", cfg.seeds},
                 {"rows", rows},
                 {"config", config_to_json(cfg)}};
    std::ofstream(fs::path(cfg.output_dir) / "summary.json") << summary.dump(2) << '\n';
    if (!failures.empty()) {
        std::ofstream(fs::path(cfg.output_dir) / "failures.json") << failures.dump(2) << '\n';
        return 1;
    }
    return 0;
}

void emit_landscape_grid(const LossOracle &loss, const std::vector<GridAxis> &grid, std::ostream &out) {
    require(loss.dim() <= 2, "landscape grid: only 1-D or 2-D losses can be gridded");
    require(grid.size() == loss.dim(), "landscape grid: need one axis per loss dimension");
    auto coord = [](const GridAxis &a, std::size_t i) {
        return a.points == 1 ? a.lo
                             : a.lo + (a.hi - a.lo) * static_cast<double>(i) / static_cast<double>(a.points - 1);
    };
    out << (grid.size() == 1 ? "theta_0" : "theta_0,theta_1") << ",loss,grad_norm\n";
    const BatchRef none;
    const std::size_t ny = grid.size() == 2 ? grid[1].points : 1;
    for (std::size_t i = 0; i < grid[0].points; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            ParamVector theta(grid.size());
            theta[0] = coord(grid[0], i);
            if (grid.size() == 2) {
                theta[1] = coord(grid[1], j);
            }
            const LossEvaluation e = loss.evaluate(theta, none);
            out << format_real(theta[0]) << ',';
            if (grid.size() == 2) {
                out << format_real(theta[1]) << ',';
            }
            out << format_real(e.value) << ',' << format_real(norm(e.gradient)) << '\n';
        }
    }
}

int emit_landscape_grid(const ExperimentConfig &cfg, const fs::path &out) {
    if (cfg.task == TaskKind::SplitBlobs) {
        std::cerr << "landscape: task split_blobs has more than 2 parameters\n";
        return 2;
    }
    const auto loss = make_analytic_loss(cfg);
    if (loss->dim() > 2 || cfg.grid.size() != loss->dim()) {
        std::cerr << "landscape: loss has dimension " << loss->dim() << " but the grid has " << cfg.grid.size()
                  << " axes (only 1-D and 2-D losses are supported)\n";
        return 2;
    }
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    std::ofstream file(out);
    emit_landscape_grid(*loss, cfg.grid, file);
    return file ? 0 : 1;
}

int run_theorem1(const ExperimentConfig &cfg) {
    fs::create_directories(cfg.output_dir);
    json doc = json::array();
    for (std::uint64_t seed : cfg.seeds) {
        Theorem1Report report;
        if (cfg.task == TaskKind::SplitBlobs) {
            std::vector<std::size_t> counts(cfg.num_sessions, cfg.classes_per_session);
            counts[0] = cfg.initial_classes;
            const SessionSequence seq =
                make_split_blobs(counts, cfg.samples_per_class, seed, cfg.hidden_layers, cfg.activation);
            MlpSpec spec = seq.shared_spec;
            spec.seed = seed;
            const MlpLoss loss(spec, std::make_shared<const TaskDataset>(seq.tasks[0]), cfg.label_masking);
            report = theorem1_check(loss, init_params(spec), cfg.theorem1_etas, loss.full_batch());
        } else {
            const auto loss = make_analytic_loss(cfg);
            report = theorem1_check(*loss, initial_point(cfg, loss->dim(), seed), cfg.theorem1_etas, BatchRef{});
        }
        json entry = report;
        entry["seed"] = seed;
        doc.push_back(std::move(entry));
    }
    std::ofstream(fs::path(cfg.output_dir) / "theorem1.json") << doc.dump(2) << '\n';
    return 0;
}

}  // namespace altersgd

#include "altersgd/errors.hpp"
#include "altersgd/experiment.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string &text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (item.empty() || used != item.size() || item.front() == '-') {
            throw altersgd::ConfigError(altersgd::ConfigError::Kind::InvalidValue, "seeds",
                                        "--seeds: '" + item + "' is not a non-negative integer");
        }
        seeds.push_back(v);
    }
    if (seeds.empty()) {
        throw altersgd::ConfigError(altersgd::ConfigError::Kind::InvalidValue, "seeds", "--seeds: empty list");
    }
    return seeds;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"AlterSGD experiments: continual split-blobs training, analytic landscapes, pair-vs-surrogate check"};
    std::string config_path;
    std::string out_dir;
    std::string seeds;
    std::string sweep;
    std::string mode = "train";
    std::size_t jobs = 0;
    app.add_option("--config", config_path, "JSON config file (defaults are used for missing keys)");
    app.add_option("--out", out_dir, "output directory (overrides output_dir)");
    app.add_option("--seeds", seeds, "comma-separated seeds, e.g. 0,1,2");
    app.add_option("--sweep", sweep, "key=v1,v2,... sweep over one numeric setting");
    app.add_option("--mode", mode, "train, landscape or theorem1")
        ->check(CLI::IsMember({"train", "landscape", "theorem1"}));
    app.add_option("--jobs", jobs, "runs executed concurrently")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    using namespace altersgd;
    ExperimentConfig cfg;
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::cerr << "error: cannot open config file '" << config_path << "'\n";
                return 2;
            }
            std::stringstream buf;
            buf << in.rdbuf();
            cfg = parse_config(buf.str());
        }
        if (!out_dir.empty()) {
            cfg.output_dir = out_dir;
        }
        if (!seeds.empty()) {
            cfg.seeds = parse_seeds(seeds);
        }
        if (!sweep.empty()) {
            cfg.sweep = parse_sweep(sweep);
        }
        if (jobs > 0) {
            cfg.jobs = jobs;
        }
        validate_config(cfg);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (mode == "landscape") {
            return emit_landscape_grid(cfg, std::filesystem::path(cfg.output_dir) / "landscape.csv");
        }
        if (mode == "theorem1") {
            return run_theorem1(cfg);
        }
        return run_experiment(cfg);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

#include "altersgd/errors.hpp"
#include "altersgd/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <string>

namespace altersgd {

using nlohmann::json;

std::string_view to_string(TaskKind kind) noexcept {
    switch (kind) {
        case TaskKind::Quadratic:
            return "quadratic";
        case TaskKind::DoubleWell:
            return "double_well";
        case TaskKind::SplitBlobs:
            return "split_blobs";
    }
    return "unknown";
}

std::string_view to_string(AnchorNormalization kind) noexcept {
    return kind == AnchorNormalization::Sum ? "sum" : "mean";
}

std::string_view to_string(OptimizerKind kind) noexcept {
    return kind == OptimizerKind::PlainSgd ? "plain_sgd" : "alter_sgd";
}

double parse_real(std::string_view text) {
    auto number = [&](std::string_view part) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
            throw std::invalid_argument("not a number: '" + std::string(text) + "'");
        }
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        return number(text);
    }
    const double den = number(text.substr(slash + 1));
    if (den == 0.0) {
        throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    }
    return number(text.substr(0, slash)) / den;
}

namespace {

[[noreturn]] void type_error(const std::string &key, const std::string &expected) {
    throw ConfigError(ConfigError::Kind::TypeMismatch, key, "config key '" + key + "': expected " + expected);
}

[[noreturn]] void value_error(const std::string &key, const std::string &why) {
    throw ConfigError(ConfigError::Kind::InvalidValue, key, "config key '" + key + "': " + why);
}

double as_real(const std::string &key, const json &j) {
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        try {
            return parse_real(j.get<std::string>());
        } catch (const std::invalid_argument &) {
            type_error(key, "a number or a fraction string such as \"25/30\"");
        }
    }
    type_error(key, "a number");
}

std::size_t as_size(const std::string &key, const json &j) {
    if (j.is_number_unsigned()) {
        return j.get<std::size_t>();
    }
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v >= 0.0 && std::floor(v) == v) {
            return static_cast<std::size_t>(v);
        }
    }
    type_error(key, "a non-negative integer");
}

bool as_bool(const std::string &key, const json &j) {
    if (!j.is_boolean()) {
        type_error(key, "true or false");
    }
    return j.get<bool>();
}

std::string as_string(const std::string &key, const json &j) {
    if (!j.is_string()) {
        type_error(key, "a string");
    }
    return j.get<std::string>();
}

std::vector<double> as_real_list(const std::string &key, const json &j) {
    if (!j.is_array()) {
        type_error(key, "an array of numbers");
    }
    std::vector<double> out;
    for (const auto &v : j) {
        out.push_back(as_real(key, v));
    }
    return out;
}

std::vector<std::size_t> as_size_list(const std::string &key, const json &j) {
    if (!j.is_array()) {
        type_error(key, "an array of integers");
    }
    std::vector<std::size_t> out;
    for (const auto &v : j) {
        out.push_back(as_size(key, v));
    }
    return out;
}

template <typename Enum>
Enum as_enum(const std::string &key, const json &j, std::initializer_list<std::pair<const char *, Enum>> options) {
    const std::string s = as_string(key, j);
    std::string names;
    for (const auto &[name, value] : options) {
        if (s == name) {
            return value;
        }
        names += names.empty() ? name : std::string(", ") + name;
    }
    value_error(key, "'" + s + "' is not one of {" + names + "}");
}

struct Field {
    const char *name;
    bool sweepable;
    std::function<void(ExperimentConfig &, const json &)> set;
    std::function<json(const ExperimentConfig &)> get;
};

#define REAL_FIELD(member)                                                                                   \
    Field {                                                                                                   \
        #member, true, [](ExperimentConfig &c, const json &j) { c.member = as_real(#member, j); },           \
            [](const ExperimentConfig &c) { return json(c.member); }                                          \
    }
#define SIZE_FIELD(member)                                                                                   \
    Field {                                                                                                   \
        #member, true, [](ExperimentConfig &c, const json &j) { c.member = as_size(#member, j); },           \
            [](const ExperimentConfig &c) { return json(c.member); }                                          \
    }
#define REAL_LIST_FIELD(member)                                                                              \
    Field {                                                                                                   \
        #member, false, [](ExperimentConfig &c, const json &j) { c.member = as_real_list(#member, j); },     \
            [](const ExperimentConfig &c) { return json(c.member); }                                          \
    }

const std::vector<Field> &fields() {
    static const std::vector<Field> table = {
        {"task", false,
         [](ExperimentConfig &c, const json &j) {
             c.task = as_enum<TaskKind>("task", j,
                                        {{"quadratic", TaskKind::Quadratic},
                                         {"double_well", TaskKind::DoubleWell},
                                         {"split_blobs", TaskKind::SplitBlobs}});
         },
         [](const ExperimentConfig &c) { return json(std::string(to_string(c.task))); }},
        {"optimizer", false,
         [](ExperimentConfig &c, const json &j) {
             c.optimizer = as_enum<OptimizerKind>(
                 "optimizer", j, {{"plain_sgd", OptimizerKind::PlainSgd}, {"alter_sgd", OptimizerKind::AlterSgd}});
         },
         [](const ExperimentConfig &c) { return json(std::string(to_string(c.optimizer))); }},
        SIZE_FIELD(iterations),
        SIZE_FIELD(epochs_initial),
        SIZE_FIELD(epochs_continual),
        REAL_FIELD(p),
        REAL_FIELD(p_initial),
        REAL_FIELD(lr_initial),
        REAL_FIELD(lr_continual),
        REAL_FIELD(lambda_reg),
        {"lambda_a", true,
         [](ExperimentConfig &c, const json &j) {
             c.lambda_a = j.is_null() ? std::nullopt : std::optional<double>(as_real("lambda_a", j));
         },
         [](const ExperimentConfig &c) { return c.lambda_a ? json(*c.lambda_a) : json(nullptr); }},
        {"lambda_b", true,
         [](ExperimentConfig &c, const json &j) {
             c.lambda_b = j.is_null() ? std::nullopt : std::optional<double>(as_real("lambda_b", j));
         },
         [](const ExperimentConfig &c) { return c.lambda_b ? json(*c.lambda_b) : json(nullptr); }},
        SIZE_FIELD(batch_size),
        {"pair_batch_mode", false,
         [](ExperimentConfig &c, const json &j) {
             c.pair_batch_mode = as_enum<PairBatchMode>(
                 "pair_batch_mode", j,
                 {{"same_batch", PairBatchMode::SameBatch}, {"fresh_batch", PairBatchMode::FreshBatch}});
         },
         [](const ExperimentConfig &c) {
             return json(c.pair_batch_mode == PairBatchMode::SameBatch ? "same_batch" : "fresh_batch");
         }},
        REAL_FIELD(gradient_noise_std),
        SIZE_FIELD(num_sessions),
        SIZE_FIELD(initial_classes),
        SIZE_FIELD(classes_per_session),
        SIZE_FIELD(samples_per_class),
        {"hidden_layers", false,
         [](ExperimentConfig &c, const json &j) { c.hidden_layers = as_size_list("hidden_layers", j); },
         [](const ExperimentConfig &c) { return json(c.hidden_layers); }},
        {"activation", false,
         [](ExperimentConfig &c, const json &j) {
             c.activation =
                 as_enum<Activation>("activation", j, {{"tanh", Activation::Tanh}, {"relu", Activation::Relu}});
         },
         [](const ExperimentConfig &c) { return json(c.activation == Activation::Tanh ? "tanh" : "relu"); }},
        {"label_masking", false,
         [](ExperimentConfig &c, const json &j) { c.label_masking = as_bool("label_masking", j); },
         [](const ExperimentConfig &c) { return json(c.label_masking); }},
        {"anchor_normalization", false,
         [](ExperimentConfig &c, const json &j) {
             c.anchor_normalization = as_enum<AnchorNormalization>(
                 "anchor_normalization", j, {{"sum", AnchorNormalization::Sum}, {"mean", AnchorNormalization::Mean}});
         },
         [](const ExperimentConfig &c) { return json(std::string(to_string(c.anchor_normalization))); }},
        REAL_LIST_FIELD(quadratic_diag),
        REAL_LIST_FIELD(dw_centers),
        REAL_LIST_FIELD(dw_depths),
        REAL_LIST_FIELD(dw_widths),
        REAL_LIST_FIELD(initial_point),
        REAL_FIELD(initial_spread),
        REAL_FIELD(flatness_rho),
        SIZE_FIELD(flatness_draws),
        {"grid", false,
         [](ExperimentConfig &c, const json &j) {
             if (!j.is_array()) {
                 type_error("grid", "an array of [lo, hi, points] triples");
             }
             c.grid.clear();
             for (const auto &axis : j) {
                 if (!axis.is_array() || axis.size() != 3) {
                     type_error("grid", "an array of [lo, hi, points] triples");
                 }
                 c.grid.push_back({as_real("grid", axis[0]), as_real("grid", axis[1]), as_size("grid", axis[2])});
             }
         },
         [](const ExperimentConfig &c) {
             json out = json::array();
             for (const auto &a : c.grid) {
                 out.push_back(json::array({a.lo, a.hi, a.points}));
             }
             return out;
         }},
        REAL_LIST_FIELD(theorem1_etas),
        {"sweep", false,
         [](ExperimentConfig &c, const json &j) {
             if (j.is_null()) {
                 c.sweep.reset();
                 return;
             }
             if (!j.is_object() || !j.contains("key") || !j.contains("values")) {
                 type_error("sweep", "an object {\"key\": name, \"values\": [...]}");
             }
             c.sweep = SweepAxis{as_string("sweep", j["key"]), as_real_list("sweep", j["values"])};
         },
         [](const ExperimentConfig &c) {
             return c.sweep ? json{{"key", c.sweep->key}, {"values", c.sweep->values}} : json(nullptr);
         }},
        {"seeds", false,
         [](ExperimentConfig &c, const json &j) {
             if (!j.is_array()) {
                 type_error("seeds", "an array of non-negative integers");
             }
             c.seeds.clear();
             for (const auto &v : j) {
                 if (!v.is_number_unsigned()) {
                     type_error("seeds", "an array of non-negative integers");
                 }
                 c.seeds.push_back(v.get<std::uint64_t>());
             }
         },
         [](const ExperimentConfig &c) { return json(c.seeds); }},
        {"output_dir", false, [](ExperimentConfig &c, const json &j) { c.output_dir = as_string("output_dir", j); },
         [](const ExperimentConfig &c) { return json(c.output_dir); }},
        {"jobs", false, [](ExperimentConfig &c, const json &j) { c.jobs = as_size("jobs", j); },
         [](const ExperimentConfig &c) { return json(c.jobs); }},
    };
    return table;
}

#undef REAL_FIELD
#undef SIZE_FIELD
#undef REAL_LIST_FIELD

const Field *find_field(const std::string &key) {
    const auto &table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field &f) { return key == f.name; });
    return it == table.end() ? nullptr : &*it;
}

}  // namespace

void apply_setting(ExperimentConfig &cfg, const std::string &key, const json &value) {
    const Field *field = find_field(key);
    if (field == nullptr) {
        throw ConfigError(ConfigError::Kind::UnknownKey, key, "unknown config key '" + key + "'");
    }
    field->set(cfg, value);
}

std::vector<std::string> sweepable_keys() {
    std::vector<std::string> keys;
    for (const auto &f : fields()) {
        if (f.sweepable) {
            keys.emplace_back(f.name);
        }
    }
    return keys;
}

SweepAxis parse_sweep(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size()) {
        throw ConfigError(ConfigError::Kind::Syntax, "sweep", "--sweep expects key=v1,v2,...");
    }
    SweepAxis axis{std::string(text.substr(0, eq)), {}};
    std::string_view rest = text.substr(eq + 1);
    while (true) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        try {
            axis.values.push_back(parse_real(item));
        } catch (const std::invalid_argument &e) {
            throw ConfigError(ConfigError::Kind::TypeMismatch, axis.key,
                              "sweep over '" + axis.key + "': " + e.what());
        }
        if (comma == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(comma + 1);
    }
    return axis;
}

void validate_config(const ExperimentConfig &c) {
    auto check = [](bool ok, const char *key, const std::string &why) {
        if (!ok) {
            value_error(key, why);
        }
    };
    check(c.p >= 0.0 && c.p <= 1.0, "p", "must lie in [0, 1]");
    check(c.p_initial >= 0.0 && c.p_initial <= 1.0, "p_initial", "must lie in [0, 1]");
    check(c.lr_initial > 0.0, "lr_initial", "must be positive");
    check(c.lr_continual > 0.0, "lr_continual", "must be positive");
    check(c.lambda_reg >= 0.0, "lambda_reg", "must be non-negative");
    check(!c.lambda_a || *c.lambda_a >= 0.0, "lambda_a", "must be non-negative");
    check(!c.lambda_b || *c.lambda_b >= 0.0, "lambda_b", "must be non-negative");
    check(c.iterations > 0, "iterations", "must be positive");
    check(c.epochs_initial > 0, "epochs_initial", "must be positive");
    check(c.epochs_continual > 0, "epochs_continual", "must be positive");
    check(c.batch_size > 0, "batch_size", "must be positive");
    check(c.gradient_noise_std >= 0.0, "gradient_noise_std", "must be non-negative");
    check(c.num_sessions > 0, "num_sessions", "must be positive");
    check(c.initial_classes > 0, "initial_classes", "must be positive");
    check(c.classes_per_session > 0, "classes_per_session", "must be positive");
    check(c.samples_per_class > 0, "samples_per_class", "must be positive");
    check(std::all_of(c.hidden_layers.begin(), c.hidden_layers.end(), [](std::size_t n) { return n > 0; }),
          "hidden_layers", "sizes must be positive");
    check(!c.quadratic_diag.empty() &&
              std::all_of(c.quadratic_diag.begin(), c.quadratic_diag.end(), [](double a) { return a >= 0.0; }),
          "quadratic_diag", "must be a non-empty list of non-negative numbers");
    check(c.dw_centers.size() == 2, "dw_centers", "needs exactly 2 entries");
    check(c.dw_depths.size() == 2 && c.dw_depths[0] > 0.0 && c.dw_depths[1] > 0.0, "dw_depths",
          "needs 2 positive entries");
    check(c.dw_widths.size() == 2 && c.dw_widths[1] > 0.0 && c.dw_widths[0] > c.dw_widths[1], "dw_widths",
          "needs 2 positive entries with the first (flat well) wider");
    check(c.initial_spread >= 0.0, "initial_spread", "must be non-negative");
    check(c.flatness_rho > 0.0, "flatness_rho", "must be positive");
    check(c.flatness_draws >= 32, "flatness_draws", "must be at least 32");
    check(!c.grid.empty() && c.grid.size() <= 2, "grid", "needs 1 or 2 axes");
    for (const auto &a : c.grid) {
        check(a.points >= 1 && a.hi >= a.lo, "grid", "axes need points >= 1 and hi >= lo");
    }
    check(c.theorem1_etas.size() >= 3, "theorem1_etas", "needs at least 3 values");
    check(!c.seeds.empty(), "seeds", "must not be empty");
    check(!c.output_dir.empty(), "output_dir", "must not be empty");
    check(c.jobs >= 1, "jobs", "must be at least 1");
    if (c.sweep) {
        const auto keys = sweepable_keys();
        check(std::find(keys.begin(), keys.end(), c.sweep->key) != keys.end(), "sweep",
              "'" + c.sweep->key + "' is not a sweepable config field");
        check(!c.sweep->values.empty(), "sweep", "needs at least one value");
        for (double v : c.sweep->values) {
            ExperimentConfig probe = c;
            probe.sweep.reset();
            apply_setting(probe, c.sweep->key, json(v));
            validate_config(probe);
        }
    }
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    const bool blank = std::all_of(text.begin(), text.end(), [](char ch) { return std::isspace(static_cast<unsigned char>(ch)); });
    if (blank) {
        return cfg;
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError(ConfigError::Kind::Syntax, "", std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError(ConfigError::Kind::Syntax, "", "config must be a JSON object");
    }
    for (const auto &[key, value] : doc.items()) {
        apply_setting(cfg, key, value);
    }
    validate_config(cfg);
    return cfg;
}

json config_to_json(const ExperimentConfig &cfg) {
    json out = json::object();
    for (const auto &f : fields()) {
        out[f.name] = f.get(cfg);
    }
    return out;
}

std::string serialize_config(const ExperimentConfig &cfg) { return config_to_json(cfg).dump(2); }

}  // namespace altersgd

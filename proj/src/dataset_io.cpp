#include "altersgd/errors.hpp"
#include "altersgd/format.hpp"
#include "altersgd/model.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <system_error>

namespace altersgd {

namespace {

template <typename T>
T parse_field(std::string_view field, std::size_t line, const char *what) {
    T value{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
        throw DatasetParseError(line, std::string("malformed ") + what + " '" + std::string(field) + "'");
    }
    return value;
}

}  // namespace

void write_dataset(std::ostream &out, const std::vector<TaskDataset> &tasks) {
    for (const auto &task : tasks) {
        for (std::size_t s = 0; s < task.size(); ++s) {
            for (double f : task.inputs[s]) {
                out << format_real(f) << ',';
            }
            out << task.labels[s] << ',' << task.task_id << '\n';
        }
    }
}

std::vector<TaskDataset> read_dataset(std::istream &in) {
    std::map<int, TaskDataset> by_task;
    std::optional<std::size_t> feature_dim;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() < 3) {
            throw DatasetParseError(line_no, "expected at least one feature, a label and a task id");
        }
        const std::size_t d = fields.size() - 2;
        if (feature_dim && *feature_dim != d) {
            throw DatasetParseError(line_no, "expected " + std::to_string(*feature_dim) + " features, found " +
                                                 std::to_string(d));
        }
        feature_dim = d;
        std::vector<double> x(d);
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = parse_field<double>(fields[i], line_no, "feature");
        }
        const int label = parse_field<int>(fields[d], line_no, "label");
        const int task_id = parse_field<int>(fields[d + 1], line_no, "task id");
        if (label < 0) {
            throw DatasetParseError(line_no, "negative label");
        }
        TaskDataset &task = by_task[task_id];
        task.task_id = task_id;
        task.inputs.push_back(std::move(x));
        task.labels.push_back(label);
        task.class_set.insert(label);
    }
    std::vector<TaskDataset> tasks;
    for (auto &[id, task] : by_task) {
        tasks.push_back(std::move(task));
    }
    return tasks;
}

}  // namespace altersgd

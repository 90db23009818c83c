// Serial reference vs OpenMP kernels on a mid-sized MLP batch.
#include "altersgd/landscape.hpp"
#include "altersgd/model.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>

using namespace altersgd;

namespace {

double time_ms(const std::function<void()> &fn, int reps) {
    fn();  // warm-up
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) {
        fn();
    }
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char *name, double serial, double parallel) {
    std::printf("%-24s serial %9.3f ms  openmp %9.3f ms  speedup %5.2fx\n", name, serial, parallel,
                serial / parallel);
}

}  // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    const SessionSequence seq = make_split_blobs({8}, 512, 7, {64, 64}, Activation::Tanh);
    MlpSpec spec = seq.shared_spec;
    const auto data = std::make_shared<const TaskDataset>(seq.tasks[0]);
    const ParamVector params = init_params(spec);
    std::vector<std::size_t> all(data->labels.size());
    std::iota(all.begin(), all.end(), 0);
    const BatchRef batch{all, 1};

    volatile double sink = 0.0;
    const double loss_serial =
        time_ms([&] { sink = reference::batch_loss(spec, params, *data, batch, false).value; }, 20);
    const double loss_omp = time_ms([&] { sink = batch_loss(spec, params, *data, batch, false).value; }, 20);
    report("batch_loss", loss_serial, loss_omp);

    const double acc_serial = time_ms([&] { sink = reference::accuracy(spec, params, *data); }, 20);
    const double acc_omp = time_ms([&] { sink = accuracy(spec, params, *data); }, 20);
    report("accuracy", acc_serial, acc_omp);

    const MlpLoss loss(spec, data, false);
    const double sharp_serial =
        time_ms([&] { sink = reference::perturbation_sharpness(loss, params, 0.05, 64, 3, batch); }, 3);
    const double sharp_omp = time_ms([&] { sink = perturbation_sharpness(loss, params, 0.05, 64, 3, batch); }, 3);
    report("perturbation_sharpness", sharp_serial, sharp_omp);
    (void)sink;
    return 0;
}

// Timing comparison between the serial reference path and the OpenMP path
// for the three parallel kernels: tree split search, stacked-ensemble
// cross-validation, and the repeated-sampling experiment loop.
// Both paths must produce identical numbers; this target reports wall time.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "maskrr/models.hpp"
#include "maskrr/parallel.hpp"
#include "maskrr/rng.hpp"
#include "maskrr/simlab.hpp"
#include "maskrr/super_learner.hpp"

namespace {

using namespace maskrr;

double time_once(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

struct BenchCase {
    std::string name;
    std::function<void()> run;
};

void report(const BenchCase& c) {
    set_exec_mode(ExecMode::Serial);
    const double serial = time_once(c.run);
    set_exec_mode(ExecMode::OpenMP);
    const double openmp = time_once(c.run);
    std::printf("%-28s serial %8.3fs   openmp %8.3fs   speedup %5.2fx\n", c.name.c_str(), serial,
                openmp, openmp > 0 ? serial / openmp : 0.0);
}

MatrixXd random_matrix(int n, int p, std::uint64_t seed) {
    Rng rng(mix_seed(seed));
    MatrixXd x(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) x(i, j) = rng.uniform();
    return x;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("max threads: %d\n", omp_get_max_threads());
#else
    std::printf("compiled without OpenMP\n");
#endif

    // 1. tree split search (parallel over candidate columns)
    const MatrixXd xtree = random_matrix(20000, 24, 11);
    VectorXd ytree(xtree.rows());
    {
        Rng rng(mix_seed(12));
        for (int i = 0; i < ytree.size(); ++i)
            ytree[i] = xtree(i, 3) * 2.0 - xtree(i, 7) + 0.1 * rng.normal();
    }
    report({"tree split search", [&] {
                TreeModel m = grow_tree(xtree, ytree, 6, 5);
                volatile double sink = m.nodes[0].threshold;
                (void)sink;
            }});

    // 2. stacked-ensemble cross-validation (parallel over fold x learner)
    SimDataset sim = simulate_dataset(dgp_confounded_additive(), 400, 21);
    report({"ensemble cross-validation", [&] {
                SuperLearnerConfig config;
                for (const char* name : {"mean", "spline", "tree", "boost", "mars"}) {
                    LearnerSpec spec;
                    spec.algorithm = algorithm_from_name(name);
                    config.library.push_back(spec);
                }
                config.K = 10;
                config.seed = 7;
                VectorXd y01 = sim.Y;
                const double lo = y01.minCoeff(), hi = y01.maxCoeff();
                for (int i = 0; i < y01.size(); ++i) y01[i] = (y01[i] - lo) / (hi - lo);
                SuperLearnerFit fit = sl_fit(config, sim.W, y01, Task::RegressionOnUnit);
                volatile double sink = fit.cv_risk_combined;
                (void)sink;
            }});

    // 3. repeated-sampling experiment (parallel over replicates)
    report({"experiment replicates", [&] {
                ExperimentConfig config;
                config.dgp = dgp_confounded_additive();
                config.n = 150;
                config.replicates = 24;
                config.scenario = Scenario::BothCorrect;
                config.estimators = {"tmle", "unadjusted"};
                config.seed = 5;
                config.K = 5;
                ExperimentReport r = run_experiment(config);
                volatile double sink = r.performance[0].bias_rd;
                (void)sink;
            }});

    return 0;
}

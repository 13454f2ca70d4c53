// Times the OpenMP kernels against their serial references.
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include <omp.h>

#include "vnn/lp.hpp"
#include "vnn/network.hpp"
#include "vnn/trainer.hpp"
#include "vnn/verify.hpp"

using namespace vnn;

namespace {

template <class F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel) {
    std::printf("%-28s serial %9.4f s  parallel %9.4f s  speedup %.2fx\n", name, serial, parallel,
                serial / parallel);
}

}  // namespace

int main() {
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    TrainConfig cfg;
    cfg.hidden = {64, 64, 64};
    cfg.seed = 1;
    const Network net = initial_network(32, 10, cfg);
    std::vector<std::vector<double>> xs(4000, std::vector<double>(32));
    for (auto& x : xs) {
        for (double& v : x) v = unit(rng);
    }
    report("forward batch (4000)", best_of(3, [&] { logits_batch_serial(net, xs); }),
           best_of(3, [&] { logits_batch(net, xs); }));

    std::vector<RobustnessProperty> props;
    for (std::size_t i = 0; i < 200; ++i) {
        props.push_back({.center = xs[i], .delta = 0.01, .label = predict(net, xs[i]), .clip = false});
    }
    for (auto m : {VerifyMethod::Interval, VerifyMethod::Polyhedral}) {
        const std::string name = std::string("verify batch ") + verify_method_name(m) + " (200)";
        report(name.c_str(), best_of(3, [&] { verify_batch_serial(net, props, m); }),
               best_of(3, [&] { verify_batch(net, props, m); }));
    }

    lp::LinearProgram prog;
    const std::size_t n = 300;
    const std::size_t m = 250;
    for (std::size_t j = 0; j < n; ++j) prog.add_variable(0.0, lp::kInf, unit(rng));
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<lp::Term> terms;
        for (std::size_t j = 0; j < n; ++j) {
            if (unit(rng) < 0.3) terms.push_back({j, unit(rng)});
        }
        prog.add_constraint(std::move(terms), lp::Relation::GreaterEqual, 1.0);
    }
    lp::SolverOptions serial;
    serial.parallel = false;
    lp::SolverOptions parallel;
    report("simplex 300x250", best_of(2, [&] { lp::solve(prog, serial); }),
           best_of(2, [&] { lp::solve(prog, parallel); }));
    return 0;
}

// Fits one Design I sample and prints the estimate with its Wald interval.

#include "rankcorr/rankcorr.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 500;
    const auto data = rankcorr::generate_design(rankcorr::DesignSpec::make(rankcorr::Design::I, n), 7);
    const auto r = rankcorr::fit(data);
    const double se = r.std_errors(0);
    std::printf("n=%d  step estimate %.4f\n", n, r.theta_mrce[0]);
    std::printf("smoothed estimate %.4f  se %.4f  95%% CI [%.4f, %.4f]\n", r.theta_hat[0], se,
                r.theta_hat[0] - rankcorr::kWaldCritical * se, r.theta_hat[0] + rankcorr::kWaldCritical * se);
    std::printf("outer iterations %d  converged %s\n", r.outer_iterations, r.converged ? "yes" : "no");
    for (const auto& w : r.warnings) std::printf("warning: %s\n", w.c_str());
    return r.converged ? 0 : 2;
}

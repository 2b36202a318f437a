#include "denots/solver.hpp"

namespace denots {

void SolverConfig::validate(double horizon) const {
    if (!(horizon > 0.0)) throw std::invalid_argument("SolverConfig: horizon must be positive");
    if (!(rtol > 0.0) || !(atol > 0.0)) {
        throw std::invalid_argument("SolverConfig: rtol and atol must be positive");
    }
    if (!(safety > 0.0 && safety <= 1.0)) {
        throw std::invalid_argument("SolverConfig: safety must be in (0, 1]");
    }
    if (!(min_factor > 0.0 && min_factor < 1.0 && max_factor > 1.0)) {
        throw std::invalid_argument("SolverConfig: step factor clamp must straddle 1");
    }
    if (max_steps == 0) throw std::invalid_argument("SolverConfig: max_steps must be positive");
    if (fixed_dt && !(*fixed_dt > 0.0)) {
        throw std::invalid_argument("SolverConfig: fixed_dt must be positive");
    }
    for (std::size_t i = 0; i < output_times.size(); ++i) {
        if (output_times[i] < 0.0 || output_times[i] > horizon) {
            throw std::invalid_argument("SolverConfig: output time outside [0, horizon]");
        }
        if (i > 0 && output_times[i] < output_times[i - 1]) {
            throw std::invalid_argument("SolverConfig: output times must be sorted");
        }
    }
}

} // namespace denots

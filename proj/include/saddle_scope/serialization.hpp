#pragma once

#include <string>
#include <vector>

#include "saddle_scope/lyapunov.hpp"
#include "saddle_scope/sgd_sim.hpp"

namespace saddle {

/// 17 significant digits; nan, inf and -inf spelled out.
std::string format_double(double v);

/// One LyapunovEstimate as {lambda, mean, std_error, n_runs, stops}. A single
/// run has no dispersion estimate, so std_error is written as null.
std::string lyapunov_json(const LyapunovEstimate& est);
/// {"protocol": {...}, "records": [...]} for a learning-rate sweep.
std::string lyapunov_sweep_json(const LyapunovProtocol& proto,
                                const std::vector<LyapunovEstimate>& records);
std::vector<LyapunovEstimate> parse_lyapunov_sweep_json(const std::string& text);

/// Non-finite numbers are written as null and read back as NaN.
std::string run_record_json(const RunRecord& rec);
RunRecord parse_run_record_json(const std::string& text);
/// "t,log_norm" rows of the sampled trajectory.
std::string trajectory_csv(const RunRecord& rec);

}  // namespace saddle

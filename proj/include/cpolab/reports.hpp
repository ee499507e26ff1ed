#ifndef CPOLAB_REPORTS_HPP
#define CPOLAB_REPORTS_HPP

#include <string>
#include <vector>

#include "cpolab/evaluation.hpp"
#include "cpolab/experiments.hpp"
#include "cpolab/training.hpp"
#include "cpolab/verification.hpp"

namespace cpolab {

// All reports are plain delimited text; plotting happens elsewhere.

void write_history(const TrainHistory& history, const std::string& path);
void write_grad_traces(const std::vector<GradTraceRecord>& traces, const std::string& path);
void write_intervention_curve(const InterventionCurve& curve, const std::string& path);
void write_delta_aug_report(const UncertaintyReport& report, const std::string& path);
void write_sweep_rows(const std::vector<NoiseCellResult>& cells, const std::string& path);
void write_sweep_aggregate(const std::vector<NoiseCellResult>& cells, const std::string& path);
void write_stream_trajectory(const StreamTrajectory& traj, const std::string& path);
void write_check_report(const CheckReport& report, const std::string& path);
std::string format_check_report(const CheckReport& report);

}  // namespace cpolab

#endif

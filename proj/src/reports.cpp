#include "cpolab/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace cpolab {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
    return out;
}

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

const char* noise_name(NoiseSpec::Kind k) {
    switch (k) {
        case NoiseSpec::Kind::none: return "none";
        case NoiseSpec::Kind::uniform: return "uniform";
        case NoiseSpec::Kind::confidence: return "confidence";
        default: return "group";
    }
}

}  // namespace

void write_history(const TrainHistory& history, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "epoch,split,metric,value\n";
    for (const auto& e : history.epochs) {
        out << e.epoch << ",train,loss," << num(e.train_loss) << '\n';
        out << e.epoch << ",val,loss," << num(e.val_loss) << '\n';
        out << e.epoch << ",val,task_loss," << num(e.val_task_loss) << '\n';
        out << e.epoch << ",val,concept_loss," << num(e.val_concept_loss) << '\n';
        out << e.epoch << ",val,accuracy," << num(e.val_accuracy) << '\n';
    }
    out << "summary,all,best_epoch," << history.best_epoch << '\n';
    out << "summary,all,stopped_epoch," << history.stopped_epoch << '\n';
}

void write_grad_traces(const std::vector<GradTraceRecord>& traces, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "step,loss_kind,sq_distance\n";
    for (const auto& t : traces) {
        out << t.step << ",bce," << num(t.bce_sq_distance) << '\n';
        out << t.step << ",cpo," << num(t.cpo_sq_distance) << '\n';
    }
}

void write_intervention_curve(const InterventionCurve& curve, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "num_intervened_groups,task_accuracy,policy\n";
    for (const auto& [groups, acc] : curve.points)
        out << groups << ',' << num(acc) << ',' << policy_name(curve.policy) << '\n';
}

void write_delta_aug_report(const UncertaintyReport& report, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "occlusion_size,num_correct,mean_delta,frac_above_zero\n";
    for (const auto& p : report.points)
        out << num(p.occlusion_size) << ',' << p.num_correct << ',' << num(p.mean_delta) << ','
            << num(p.frac_above_zero) << '\n';
}

void write_sweep_rows(const std::vector<NoiseCellResult>& cells, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "objective,noise_kind,p,seed,status,task_accuracy,concept_auc,error\n";
    for (const auto& c : cells) {
        out << objective_name(c.objective) << ',' << noise_name(c.noise_kind) << ',' << num(c.p)
            << ',' << c.seed << ',' << (c.ok ? "ok" : "failed") << ','
            << (c.ok ? num(c.metrics.task_accuracy) : "") << ','
            << (c.ok ? num(c.metrics.concept_auc) : "") << ',' << c.error << '\n';
    }
}

void write_sweep_aggregate(const std::vector<NoiseCellResult>& cells, const std::string& path) {
    struct Agg {
        std::vector<double> acc, auc;
    };
    std::map<std::pair<std::string, double>, Agg> by_cell;
    for (const auto& c : cells) {
        if (!c.ok) continue;
        auto& a = by_cell[{objective_name(c.objective), c.p}];
        a.acc.push_back(c.metrics.task_accuracy);
        a.auc.push_back(c.metrics.concept_auc);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    auto stdev = [&](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        const double m = mean(v);
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    };

    std::map<std::string, double> base_acc, base_auc;
    for (const auto& [key, agg] : by_cell)
        if (key.second == 0.0) {
            base_acc[key.first] = mean(agg.acc);
            base_auc[key.first] = mean(agg.auc);
        }

    std::ofstream out = open_out(path);
    out << "objective,p,runs,task_accuracy_mean,task_accuracy_std,concept_auc_mean,"
           "concept_auc_std,task_accuracy_degradation,concept_auc_degradation\n";
    for (const auto& [key, agg] : by_cell) {
        const double acc_m = mean(agg.acc);
        const double auc_m = mean(agg.auc);
        const bool has_base = base_acc.count(key.first) > 0;
        out << key.first << ',' << num(key.second) << ',' << agg.acc.size() << ',' << num(acc_m)
            << ',' << num(stdev(agg.acc)) << ',' << num(auc_m) << ',' << num(stdev(agg.auc)) << ','
            << (has_base ? num(acc_m - base_acc[key.first]) : "") << ','
            << (has_base ? num(auc_m - base_auc[key.first]) : "") << '\n';
    }
}

void write_stream_trajectory(const StreamTrajectory& traj, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "strategy,concept_fraction,blocks_seen,task_accuracy,concept_auc\n";
    for (std::size_t b = 0; b < traj.per_block.size(); ++b)
        out << strategy_name(traj.strategy) << ',' << num(traj.concept_fraction) << ',' << (b + 1)
            << ',' << num(traj.per_block[b].task_accuracy) << ','
            << num(traj.per_block[b].concept_auc) << '\n';
}

std::string format_check_report(const CheckReport& report) {
    std::ostringstream out;
    for (const auto& r : report.results) {
        out << (r.passed ? "PASS" : "FAIL") << ' ' << r.name << " measured=" << num(r.measured)
            << " tolerance=" << num(r.tolerance);
        if (!r.details.empty()) out << "  (" << r.details << ')';
        out << '\n';
    }
    return out.str();
}

void write_check_report(const CheckReport& report, const std::string& path) {
    std::ofstream out = open_out(path);
    out << format_check_report(report);
}

}  // namespace cpolab

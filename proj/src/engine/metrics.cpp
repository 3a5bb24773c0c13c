#include "treeduce/engine.hpp"

#include <cstdio>
#include <json.hpp>
#include <ostream>
#include <sstream>

namespace treeduce::engine {

namespace {

double ratio(double part, double whole)
{
    return whole > 0 ? part / whole : 0.0;
}

}  // namespace

double WorkloadMetrics::cpu_fraction() const { return ratio(totals.cpu_s, totals.wall_s); }
double WorkloadMetrics::read_fraction() const { return ratio(totals.read_s, totals.wall_s); }
double WorkloadMetrics::decompress_fraction() const { return ratio(totals.decompress_s, totals.wall_s); }

double WorkloadMetrics::full_concurrency_fraction() const
{
    if (concurrency.empty() || workers == 0)
        return 0.0;
    std::size_t full = 0;
    for (const auto& s : concurrency)
        if (s.value >= static_cast<double>(workers))
            ++full;
    return static_cast<double>(full) / static_cast<double>(concurrency.size());
}

WorkloadMetrics merge_metrics(const std::vector<TaskMetrics>& tasks, std::vector<TimelineSample> concurrency,
                              std::vector<TimelineSample> throughput, double elapsed_s, std::size_t workers)
{
    WorkloadMetrics w;
    w.workers = workers;
    w.tasks = tasks.size();
    w.elapsed_s = elapsed_s;
    for (const auto& t : tasks) {
        w.totals.wall_s += t.wall_s;
        w.totals.cpu_s += t.cpu_s;
        w.totals.read_s += t.read_s;
        w.totals.decompress_s += t.decompress_s;
        w.totals.entries_in += t.entries_in;
        w.totals.entries_out += t.entries_out;
        w.totals.bytes_fetched += t.bytes_fetched;
        w.totals.bytes_requested += t.bytes_requested;
        w.totals.attempts += t.attempts;
    }
    w.concurrency = std::move(concurrency);
    w.throughput = std::move(throughput);
    return w;
}

void write_metrics_csv(const std::vector<TaskMetrics>& tasks, std::ostream& out)
{
    out << "task_id,wall_s,cpu_s,read_s,decompress_s,entries_in,entries_out,bytes_fetched\n";
    char buf[256];
    for (const auto& t : tasks) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.9f,%.9f,%.9f,%llu,%llu,%llu\n", t.task_id, t.wall_s, t.cpu_s,
                      t.read_s, t.decompress_s, static_cast<unsigned long long>(t.entries_in),
                      static_cast<unsigned long long>(t.entries_out), static_cast<unsigned long long>(t.bytes_fetched));
        out << buf;
    }
}

namespace {

nlohmann::json task_json(const TaskMetrics& t)
{
    return {{"task_id", t.task_id},         {"wall_s", t.wall_s},
            {"cpu_s", t.cpu_s},             {"read_s", t.read_s},
            {"decompress_s", t.decompress_s}, {"entries_in", t.entries_in},
            {"entries_out", t.entries_out}, {"bytes_fetched", t.bytes_fetched},
            {"bytes_requested", t.bytes_requested}, {"attempts", t.attempts}};
}

nlohmann::json timeline_json(const std::vector<TimelineSample>& samples)
{
    auto arr = nlohmann::json::array();
    for (const auto& s : samples)
        arr.push_back({s.t_s, s.value});
    return arr;
}

}  // namespace

void write_metrics_jsonl(const std::vector<TaskMetrics>& tasks, const WorkloadMetrics& w, std::ostream& out)
{
    for (const auto& t : tasks) {
        auto j = task_json(t);
        j["type"] = "task";
        out << j.dump() << '\n';
    }
    nlohmann::json summary = task_json(w.totals);
    summary.erase("task_id");
    summary["type"] = "workload";
    summary["workers"] = w.workers;
    summary["tasks"] = w.tasks;
    summary["elapsed_s"] = w.elapsed_s;
    summary["cpu_fraction"] = w.cpu_fraction();
    summary["read_fraction"] = w.read_fraction();
    summary["decompress_fraction"] = w.decompress_fraction();
    summary["full_concurrency_fraction"] = w.full_concurrency_fraction();
    summary["concurrency"] = timeline_json(w.concurrency);
    summary["throughput_Bps"] = timeline_json(w.throughput);
    out << summary.dump() << '\n';
}

std::string format_breakdown(const WorkloadMetrics& w)
{
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-34s %14s %9s\n", "Metric", "Total time (s)", "Fraction");
    os << buf;
    auto row = [&](const char* name, double v, double frac) {
        std::snprintf(buf, sizeof(buf), "%-34s %14.3f %9.3f\n", name, v, frac);
        os << buf;
    };
    row("Total execution time (task sum)", w.totals.wall_s, w.totals.wall_s > 0 ? 1.0 : 0.0);
    row("CPU time", w.totals.cpu_s, w.cpu_fraction());
    row("Read time", w.totals.read_s, w.read_fraction());
    row("Decompression time (in GC slot)", w.totals.decompress_s, w.decompress_fraction());
    std::snprintf(buf, sizeof(buf), "tasks %zu, workers %zu, job wall %.3f s, entries %llu -> %llu, fetched %llu B\n",
                  w.tasks, w.workers, w.elapsed_s, static_cast<unsigned long long>(w.totals.entries_in),
                  static_cast<unsigned long long>(w.totals.entries_out),
                  static_cast<unsigned long long>(w.totals.bytes_fetched));
    os << buf;
    return os.str();
}

}  // namespace treeduce::engine

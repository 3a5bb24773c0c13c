#pragma once

// Reduction engine: splits inputs into entry-range tasks, runs skim / slim /
// derive on a pool of executors x cores workers, writes one TreeFile per task
// and records per-task timing and byte accounting.

#include "treeduce/expr.hpp"
#include "treeduce/histagg.hpp"
#include "treeduce/io.hpp"
#include "treeduce/treefile.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeduce::engine {

class JobError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct DerivedColumn
{
    std::string name;
    std::string expr;
};

struct JobSpec
{
    std::vector<std::string> inputs;  ///< local paths or xrdl:// URLs
    std::string tree = "Events";
    std::vector<std::string> keep;
    std::optional<std::string> skim;
    std::vector<DerivedColumn> derived;
    std::filesystem::path output;
    std::uint64_t partition_entries = 65536;

    /// Checks name rules; expressions are checked by plan().
    void validate() const;
};

/// Reads `key = value` lines. Keys: inputs, tree, keep, skim, derive.NAME,
/// output, partition_entries. Lists are comma-separated; values may be
/// double-quoted. Relative local paths resolve against the file's directory.
JobSpec load_job(const std::filesystem::path& file);
JobSpec parse_job(std::string_view text, const std::filesystem::path& base_dir = {});

struct EngineConfig
{
    std::size_t executors = 1;
    std::size_t cores_per_executor = 1;
    std::uint64_t read_ahead = 65536;
    std::size_t max_cache_windows = 4;
    double sample_interval_s = 0.01;

    [[nodiscard]] std::size_t workers() const { return executors * cores_per_executor; }
};

/// Opens a local file or an xrdl:// URL.
std::shared_ptr<ByteSource> open_input(const std::string& input, const EngineConfig& config);

struct Task
{
    std::size_t task_id = 0;
    std::size_t input_index = 0;
    std::string input;
    std::string tree;
    EntryRange range;
    std::vector<std::string> required;  ///< sorted branch names
};

/// Branch names read by the job: keep plus every column the skim, derived and
/// extra expressions reference (derived names excluded).
std::vector<std::string> required_columns(const JobSpec& job, const std::vector<std::string>& extra_refs = {});

struct Plan
{
    std::vector<Task> tasks;
    expr::Schema schema;  ///< tree schema of the first input
};

/// Opens every input, checks schema consistency and typechecks expressions.
/// `extra_refs` are additional column references (histogram quantities).
Plan plan(const JobSpec& job, const EngineConfig& config, const std::vector<std::string>& extra_refs = {});

struct TaskMetrics
{
    std::size_t task_id = 0;
    double wall_s = 0;
    double cpu_s = 0;
    double read_s = 0;
    double decompress_s = 0;
    std::uint64_t entries_in = 0;
    std::uint64_t entries_out = 0;
    std::uint64_t bytes_fetched = 0;
    std::uint64_t bytes_requested = 0;
    int attempts = 0;
};

struct TimelineSample
{
    double t_s = 0;
    double value = 0;
};

struct WorkloadMetrics
{
    std::size_t workers = 0;
    std::size_t tasks = 0;
    double elapsed_s = 0;  ///< job wall clock
    TaskMetrics totals;    ///< field-wise sums (task_id unused)
    std::vector<TimelineSample> concurrency;  ///< active task count
    std::vector<TimelineSample> throughput;   ///< bytes/s fetched since previous sample

    [[nodiscard]] double cpu_fraction() const;
    [[nodiscard]] double read_fraction() const;
    [[nodiscard]] double decompress_fraction() const;
    /// Share of concurrency samples with every worker busy.
    [[nodiscard]] double full_concurrency_fraction() const;
};

WorkloadMetrics merge_metrics(const std::vector<TaskMetrics>& tasks, std::vector<TimelineSample> concurrency = {},
                              std::vector<TimelineSample> throughput = {}, double elapsed_s = 0,
                              std::size_t workers = 0);

struct ManifestEntry
{
    std::size_t task_id = 0;
    std::string file;  ///< relative to the output directory
    std::string input;
    EntryRange range;
    std::uint64_t entries = 0;
    std::uint64_t bytes = 0;
};

struct RunOptions
{
    /// Called before a task commits its output; throwing fails the attempt.
    std::function<void(const Task&, int attempt)> fault_injector;
    /// Filled with every selected event, per task, then merged in task order.
    std::optional<hist::Aggregator> histogram;
    bool write_outputs = true;
};

struct RunResult
{
    std::vector<ManifestEntry> manifest;
    std::vector<TaskMetrics> task_metrics;
    WorkloadMetrics metrics;
    std::optional<hist::Aggregator> histogram;
};

class JobFailed : public JobError
{
public:
    JobFailed(std::vector<std::size_t> failed, const std::string& what)
        : JobError(what), failed_(std::move(failed))
    {
    }
    [[nodiscard]] const std::vector<std::size_t>& failed_tasks() const { return failed_; }

private:
    std::vector<std::size_t> failed_;
};

/// Runs the job. With write_outputs, the output directory receives
/// part-NNNNN.trf per task, manifest.jsonl, metrics.jsonl and metrics.csv.
RunResult run(const JobSpec& job, const EngineConfig& config, RunOptions options = {});

std::string output_file_name(std::size_t task_id);

void write_manifest(const std::vector<ManifestEntry>& manifest, std::ostream& out);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& file);

/// Columns: task_id, wall_s, cpu_s, read_s, decompress_s, entries_in,
/// entries_out, bytes_fetched.
void write_metrics_csv(const std::vector<TaskMetrics>& tasks, std::ostream& out);
void write_metrics_jsonl(const std::vector<TaskMetrics>& tasks, const WorkloadMetrics& w, std::ostream& out);
/// Total / CPU / read / decompression breakdown with fractions.
std::string format_breakdown(const WorkloadMetrics& w);

/// Concatenates the outputs of one or more output directories (each with a
/// manifest.jsonl) in manifest order into a single TreeFile. Returns entries.
std::uint64_t concat_outputs(const std::vector<std::filesystem::path>& output_dirs,
                             const std::filesystem::path& out_file, const std::string& tree = "Events");

}  // namespace treeduce::engine

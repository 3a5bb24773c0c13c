#pragma once

// Synthetic dataset generator and scaling experiments.
//
// Generator: every file f has its own SplitMix64 stream keyed by
//   key_f = mix64(seed ^ (0xD1B54A32D192ED03 * (f + 1)))
// and the i-th draw (i = 1, 2, ...) is mix64(key_f + i * 0x9E3779B97F4A7C15),
// turned into u in [0, 1) as (draw >> 11) * 2^-53. Per event, in order:
//   nMuon   inverse CDF of Poisson(2) at u
//   per muon: pt = 3 - 15 * log1p(-u), eta = -2.5 + 5u, phi = -pi + 2 pi u,
//             charge = u < 0.5 ? -1 : +1
//   MET     = -30 * log1p(-u)
// Optional Aux_k flat f32 branches draw from a second stream (key_f xor 1) so
// the base columns do not depend on them.

#include "treeduce/engine.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace treeduce::bench {

std::uint64_t mix64(std::uint64_t z);

/// Counter-based SplitMix64 stream.
class SplitMix64
{
public:
    explicit SplitMix64(std::uint64_t key) : key_(key) {}
    std::uint64_t next();
    double uniform();  ///< [0, 1) with 53 random bits
    [[nodiscard]] std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t file_stream_key(std::uint64_t seed, std::uint64_t file_index);
int poisson_inverse_cdf(double u, double mean);

struct GenSpec
{
    std::uint64_t seed = 1;
    std::uint64_t n_events = 1u << 20;  ///< per file
    std::size_t n_files = 8;
    std::uint32_t basket_target_entries = 4096;
    Codec codec = Codec::Deflate;
    std::size_t extra_flat_branches = 0;  ///< Aux_0 .. Aux_{k-1}
};

/// One file's tree, in memory.
TreeData generate_tree(const GenSpec& spec, std::size_t file_index);

struct DatasetFile
{
    std::string name;
    std::uint64_t entries = 0;
    std::uint64_t bytes = 0;
};

struct Dataset
{
    std::filesystem::path dir;
    GenSpec spec;
    std::vector<DatasetFile> files;

    [[nodiscard]] std::vector<std::string> paths(std::size_t first_n) const;
    [[nodiscard]] std::uint64_t bytes(std::size_t first_n) const;
};

/// Writes events-NNNN.trf files and dataset.json.
Dataset generate(const GenSpec& spec, const std::filesystem::path& out_dir);
/// Reads dataset.json; nullopt when missing.
std::optional<Dataset> load_dataset(const std::filesystem::path& dir);
/// Loads the dataset if its manifest matches `spec`, otherwise regenerates.
Dataset ensure_dataset(const GenSpec& spec, const std::filesystem::path& dir);

/// Skim nMuon >= 2 && max(Muon_pt) > 20; keep nMuon, Muon_pt, Muon_eta, MET;
/// derive leading_pt = max(Muon_pt).
engine::JobSpec demo_job(std::vector<std::string> inputs, std::filesystem::path output,
                         std::uint64_t partition_entries = 65536);

/// FNV-1a over the output part files in manifest order.
std::uint64_t output_digest(const std::filesystem::path& output_dir);

// ---------------------------------------------------------------------------
// Experiments

struct BenchConfig
{
    std::filesystem::path dataset_dir = "bench-data";
    GenSpec gen;
    std::vector<std::size_t> multiples{1, 2, 4, 8};
    std::vector<std::pair<std::size_t, std::size_t>> worker_configs{{1, 1}, {1, 2}, {1, 4}, {2, 4}};
    std::vector<std::uint64_t> read_aheads{64u << 10, 1u << 20, 32u << 20};
    std::size_t repetitions = 3;
    std::uint64_t bandwidth_cap = 0;  ///< 0: two times measured single-worker throughput
    std::uint64_t readahead_cap = 0;  ///< cap for the sweep; 0: same rule as core scaling
    std::size_t core_files = 2;       ///< files used by core scaling
    std::size_t readahead_files = 2;  ///< files used by the sweep
    std::string readahead_keep = "MET";
    std::size_t executors = 1;        ///< pool for size scaling and the sweep
    std::size_t cores = 1;
    std::uint64_t partition_entries = 65536;
};

/// key = value file; keys mirror BenchConfig fields (dataset, seed,
/// events_per_file, files, basket_entries, extra_branches, multiples,
/// workers as "ExC" items, read_ahead, repetitions, bandwidth_cap,
/// readahead_cap, core_files, readahead_files, readahead_keep, executors,
/// cores, partition_entries). Relative paths resolve against the file.
BenchConfig load_bench_config(const std::filesystem::path& file);
BenchConfig parse_bench_config(std::string_view text, const std::filesystem::path& base_dir = {});

struct Breakdown
{
    double total_s = 0, cpu_s = 0, read_s = 0, decompress_s = 0;
    static Breakdown from(const engine::WorkloadMetrics& w);
};

struct SizeRow
{
    std::size_t multiple = 0;
    std::uint64_t bytes = 0;
    double median_wall_s = 0;
    std::vector<double> walls;
};

struct CoreRow
{
    std::size_t executors = 0, cores = 0;
    double median_wall_s = 0;
    double throughput_Bps = 0;
    std::uint64_t bandwidth_cap_Bps = 0;
    std::vector<double> walls;
};

struct ReadAheadRow
{
    std::uint64_t read_ahead = 0;
    std::uint64_t bytes_requested = 0;
    std::uint64_t bytes_fetched = 0;
    double median_wall_s = 0;
    std::vector<double> walls;
    [[nodiscard]] double amplification() const;
};

struct ExperimentReport
{
    std::string experiment;  ///< size, cores or readahead
    std::vector<SizeRow> size_rows;
    double r2 = 0, slope_s_per_byte = 0, intercept_s = 0;
    std::vector<CoreRow> core_rows;
    double single_worker_Bps = 0;
    std::uint64_t bandwidth_cap_Bps = 0;
    std::vector<ReadAheadRow> readahead_rows;
    std::optional<Breakdown> breakdown;
    std::optional<bool> outputs_identical;  ///< digest equality across configurations
    bool complete = true;
    std::string error;
};

struct LinearFit
{
    double slope = 0, intercept = 0, r2 = 0;
};
/// Ordinary least squares y = slope * x + intercept.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> v);

ExperimentReport run_size_scaling(const BenchConfig& cfg, const std::filesystem::path& work_dir);
ExperimentReport run_core_scaling(const BenchConfig& cfg, const std::filesystem::path& work_dir);
ExperimentReport run_readahead_sweep(const BenchConfig& cfg, const std::filesystem::path& work_dir);

/// Demo-job throughput (bytes fetched / wall) of one worker reading through an
/// uncapped server.
double measure_single_worker_throughput(const std::vector<std::string>& files, const BenchConfig& cfg,
                                        const std::filesystem::path& work_dir);

// Reports: pure functions of the recorded results.
void write_size_csv(const ExperimentReport& r, std::ostream& out);
void write_core_csv(const ExperimentReport& r, std::ostream& out);
void write_readahead_csv(const ExperimentReport& r, std::ostream& out);
std::string render_summary(const ExperimentReport& r);
std::string to_json(const ExperimentReport& r);
ExperimentReport report_from_json(std::string_view text);
/// Writes <experiment>.csv (size_scaling.csv, core_scaling.csv or
/// readahead_sweep.csv), summary.md and results.json into `out_dir`.
void write_report(const ExperimentReport& r, const std::filesystem::path& out_dir);

}  // namespace treeduce::bench

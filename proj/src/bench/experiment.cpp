#include "treeduce/bench.hpp"
#include "treeduce/xrdlite.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace treeduce::bench {

namespace fs = std::filesystem;

double median(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    LinearFit f;
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2 || x.size() != y.size())
        return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0)
        return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += r * r;
    }
    f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
    return f;
}

double ReadAheadRow::amplification() const
{
    return static_cast<double>(bytes_fetched) / static_cast<double>(std::max<std::uint64_t>(bytes_requested, 1));
}

Breakdown Breakdown::from(const engine::WorkloadMetrics& w)
{
    return {w.totals.wall_s, w.totals.cpu_s, w.totals.read_s, w.totals.decompress_s};
}

// ---------------------------------------------------------------------------
// Config file

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> items(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty())
            out.emplace_back(item);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

std::uint64_t to_u64(std::string_view s, const std::string& key)
{
    s = trim(s);
    std::uint64_t mult = 1;
    if (s.ends_with("KiB")) {
        mult = 1u << 10;
        s.remove_suffix(3);
    } else if (s.ends_with("MiB")) {
        mult = 1u << 20;
        s.remove_suffix(3);
    } else if (s.ends_with("GiB")) {
        mult = 1u << 30;
        s.remove_suffix(3);
    }
    s = trim(s);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw engine::JobError("bench config: bad number for " + key + ": '" + std::string(s) + "'");
    return v * mult;
}

}  // namespace

BenchConfig parse_bench_config(std::string_view text, const fs::path& base_dir)
{
    BenchConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto l = trim(line);
        if (l.empty() || l.front() == '#')
            continue;
        auto eq = l.find('=');
        if (eq == std::string_view::npos)
            throw engine::JobError("bench config line " + std::to_string(line_no) + ": expected key = value");
        std::string key(trim(l.substr(0, eq)));
        auto value = l.substr(eq + 1);
        if (key == "dataset") {
            fs::path p{std::string(trim(value))};
            cfg.dataset_dir = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
        } else if (key == "seed") {
            cfg.gen.seed = to_u64(value, key);
        } else if (key == "events_per_file") {
            cfg.gen.n_events = to_u64(value, key);
        } else if (key == "files") {
            cfg.gen.n_files = to_u64(value, key);
        } else if (key == "basket_entries") {
            cfg.gen.basket_target_entries = static_cast<std::uint32_t>(to_u64(value, key));
        } else if (key == "extra_branches") {
            cfg.gen.extra_flat_branches = to_u64(value, key);
        } else if (key == "multiples") {
            cfg.multiples.clear();
            for (auto& i : items(value))
                cfg.multiples.push_back(to_u64(i, key));
        } else if (key == "workers") {
            cfg.worker_configs.clear();
            for (auto& i : items(value)) {
                auto x = i.find('x');
                if (x == std::string::npos)
                    throw engine::JobError("bench config: workers items look like 2x4, got '" + i + "'");
                cfg.worker_configs.emplace_back(to_u64(std::string_view(i).substr(0, x), key),
                                                to_u64(std::string_view(i).substr(x + 1), key));
            }
        } else if (key == "read_ahead") {
            cfg.read_aheads.clear();
            for (auto& i : items(value))
                cfg.read_aheads.push_back(to_u64(i, key));
        } else if (key == "repetitions") {
            cfg.repetitions = to_u64(value, key);
        } else if (key == "bandwidth_cap") {
            cfg.bandwidth_cap = trim(value) == "auto" ? 0 : to_u64(value, key);
        } else if (key == "readahead_cap") {
            cfg.readahead_cap = trim(value) == "auto" ? 0 : to_u64(value, key);
        } else if (key == "core_files") {
            cfg.core_files = to_u64(value, key);
        } else if (key == "readahead_files") {
            cfg.readahead_files = to_u64(value, key);
        } else if (key == "readahead_keep") {
            cfg.readahead_keep = std::string(trim(value));
        } else if (key == "executors") {
            cfg.executors = to_u64(value, key);
        } else if (key == "cores") {
            cfg.cores = to_u64(value, key);
        } else if (key == "partition_entries") {
            cfg.partition_entries = to_u64(value, key);
        } else {
            throw engine::JobError("bench config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (cfg.repetitions < 1)
        throw engine::JobError("bench config: repetitions must be at least 1");
    if (cfg.executors < 1 || cfg.cores < 1 || cfg.partition_entries < 1)
        throw engine::JobError("bench config: executors, cores and partition_entries must be positive");
    return cfg;
}

BenchConfig load_bench_config(const fs::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw engine::JobError("cannot read bench config " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_bench_config(ss.str(), file.parent_path());
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

engine::EngineConfig engine_config(std::size_t executors, std::size_t cores, std::uint64_t read_ahead = 65536)
{
    engine::EngineConfig c;
    c.executors = executors;
    c.cores_per_executor = cores;
    c.read_ahead = read_ahead;
    return c;
}

std::vector<std::string> urls(const std::vector<std::string>& paths, std::uint16_t port)
{
    std::vector<std::string> out;
    for (const auto& p : paths)
        out.push_back("xrdl://127.0.0.1:" + std::to_string(port) + "/" + fs::path(p).filename().string());
    return out;
}

xrdl::ServerConfig server_config(const fs::path& root, std::uint64_t cap)
{
    xrdl::ServerConfig sc;
    sc.root_dir = root;
    sc.port = 0;
    sc.bandwidth_cap = cap;
    return sc;
}

double throughput(const engine::RunResult& r)
{
    return r.metrics.elapsed_s > 0 ? static_cast<double>(r.metrics.totals.bytes_fetched) / r.metrics.elapsed_s : 0.0;
}

/// Runs `body` and converts an exception into an incomplete report.
template <typename F>
ExperimentReport guarded(ExperimentReport report, F&& body)
{
    try {
        body(report);
    } catch (const std::exception& e) {
        report.complete = false;
        report.error = e.what();
    }
    return report;
}

}  // namespace

double measure_single_worker_throughput(const std::vector<std::string>& files, const BenchConfig& cfg,
                                        const fs::path& work_dir)
{
    if (files.empty())
        return 0.0;
    xrdl::Server server(server_config(fs::path(files.front()).parent_path(), 0));
    auto job = demo_job(urls(files, server.port()), work_dir / "single-worker", cfg.partition_entries);
    std::vector<double> rates;
    for (std::size_t r = 0; r < cfg.repetitions; ++r)
        rates.push_back(throughput(engine::run(job, engine_config(1, 1))));
    return median(rates);
}

ExperimentReport run_size_scaling(const BenchConfig& cfg, const fs::path& work_dir)
{
    ExperimentReport rep;
    rep.experiment = "size";
    return guarded(std::move(rep), [&](ExperimentReport& report) {
        if (cfg.multiples.empty())
            return;
        auto gen = cfg.gen;
        gen.n_files = std::max(gen.n_files, *std::max_element(cfg.multiples.begin(), cfg.multiples.end()));
        auto ds = ensure_dataset(gen, cfg.dataset_dir);
        std::vector<double> xs, ys;
        bool identical = true;
        for (auto m : cfg.multiples) {
            auto out = work_dir / ("size-x" + std::to_string(m));
            auto job = demo_job(ds.paths(m), out, cfg.partition_entries);
            SizeRow row;
            row.multiple = m;
            row.bytes = ds.bytes(m);
            std::optional<std::uint64_t> digest;
            engine::RunResult last;
            for (std::size_t r = 0; r < cfg.repetitions; ++r) {
                last = engine::run(job, engine_config(cfg.executors, cfg.cores));
                row.walls.push_back(last.metrics.elapsed_s);
                auto d = output_digest(out);
                identical = identical && (!digest || *digest == d);
                digest = d;
            }
            row.median_wall_s = median(row.walls);
            report.breakdown = Breakdown::from(last.metrics);
            report.size_rows.push_back(row);
            xs.push_back(static_cast<double>(row.bytes));
            ys.push_back(row.median_wall_s);
            auto fit = fit_line(xs, ys);
            report.r2 = fit.r2;
            report.slope_s_per_byte = fit.slope;
            report.intercept_s = fit.intercept;
        }
        report.outputs_identical = identical;
    });
}

ExperimentReport run_core_scaling(const BenchConfig& cfg, const fs::path& work_dir)
{
    ExperimentReport rep;
    rep.experiment = "cores";
    return guarded(std::move(rep), [&](ExperimentReport& report) {
        if (cfg.worker_configs.empty())
            return;
        auto gen = cfg.gen;
        gen.n_files = std::max(gen.n_files, cfg.core_files);
        auto ds = ensure_dataset(gen, cfg.dataset_dir);
        auto files = ds.paths(cfg.core_files);
        report.single_worker_Bps = measure_single_worker_throughput(files, cfg, work_dir);
        const auto cap = cfg.bandwidth_cap ? cfg.bandwidth_cap
                                           : static_cast<std::uint64_t>(std::llround(2.0 * report.single_worker_Bps));
        report.bandwidth_cap_Bps = cap;
        xrdl::Server server(server_config(ds.dir, cap));
        auto inputs = urls(files, server.port());
        std::set<std::uint64_t> digests;
        for (auto [e, c] : cfg.worker_configs) {
            auto out = work_dir / ("cores-" + std::to_string(e) + "x" + std::to_string(c));
            auto job = demo_job(inputs, out, cfg.partition_entries);
            CoreRow row;
            row.executors = e;
            row.cores = c;
            row.bandwidth_cap_Bps = cap;
            std::vector<double> rates;
            engine::RunResult last;
            for (std::size_t r = 0; r < cfg.repetitions; ++r) {
                last = engine::run(job, engine_config(e, c));
                row.walls.push_back(last.metrics.elapsed_s);
                rates.push_back(throughput(last));
                digests.insert(output_digest(out));
            }
            row.median_wall_s = median(row.walls);
            row.throughput_Bps = median(rates);
            report.breakdown = Breakdown::from(last.metrics);
            report.core_rows.push_back(row);
        }
        report.outputs_identical = digests.size() <= 1;
    });
}

ExperimentReport run_readahead_sweep(const BenchConfig& cfg, const fs::path& work_dir)
{
    ExperimentReport rep;
    rep.experiment = "readahead";
    return guarded(std::move(rep), [&](ExperimentReport& report) {
        if (cfg.read_aheads.empty())
            return;
        auto gen = cfg.gen;
        gen.n_files = cfg.readahead_files;
        if (gen.extra_flat_branches == 0)
            gen.extra_flat_branches = 2;  // six demo branches + two Aux = eight
        auto ds = ensure_dataset(gen, cfg.dataset_dir / "wide");
        auto files = ds.paths(cfg.readahead_files);
        std::uint64_t cap = cfg.readahead_cap;
        if (cap == 0) {
            report.single_worker_Bps = measure_single_worker_throughput(files, cfg, work_dir);
            cap = static_cast<std::uint64_t>(std::llround(2.0 * report.single_worker_Bps));
        }
        report.bandwidth_cap_Bps = cap;
        xrdl::Server server(server_config(ds.dir, cap));
        engine::JobSpec job;
        job.inputs = urls(files, server.port());
        job.keep = {cfg.readahead_keep};
        job.partition_entries = cfg.partition_entries;
        std::set<std::uint64_t> digests;
        for (auto ra : cfg.read_aheads) {
            job.output = work_dir / ("readahead-" + std::to_string(ra));
            ReadAheadRow row;
            row.read_ahead = ra;
            for (std::size_t r = 0; r < cfg.repetitions; ++r) {
                auto res = engine::run(job, engine_config(cfg.executors, cfg.cores, ra));
                row.walls.push_back(res.metrics.elapsed_s);
                row.bytes_requested = res.metrics.totals.bytes_requested;
                row.bytes_fetched = res.metrics.totals.bytes_fetched;
                digests.insert(output_digest(job.output));
                if (!report.breakdown)
                    report.breakdown = Breakdown::from(res.metrics);
            }
            row.median_wall_s = median(row.walls);
            report.readahead_rows.push_back(row);
        }
        report.outputs_identical = digests.size() <= 1;
    });
}

}  // namespace treeduce::bench

#include "treeduce/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <thread>

namespace treeduce::engine {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string output_file_name(std::size_t task_id)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "part-%05zu.trf", task_id);
    return buf;
}

namespace {

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Forwards to another source and publishes newly fetched bytes to a shared
/// counter for the throughput timeline.
class MeteredSource final : public ByteSource
{
public:
    MeteredSource(std::shared_ptr<ByteSource> inner, std::atomic<std::uint64_t>& counter)
        : inner_(std::move(inner)), counter_(counter)
    {
    }
    std::uint64_t size() const override { return inner_->size(); }
    void read_at(std::uint64_t offset, std::span<std::uint8_t> out) override
    {
        inner_->read_at(offset, out);
        auto fetched = inner_->stats().bytes_fetched;
        counter_ += fetched - published_;
        published_ = fetched;
    }
    IoStats stats() const override { return inner_->stats(); }

private:
    std::shared_ptr<ByteSource> inner_;
    std::atomic<std::uint64_t>& counter_;
    std::uint64_t published_ = 0;
};

struct Prepared
{
    expr::ExprPtr skim;
    std::vector<std::pair<std::string, expr::ExprPtr>> derived;
};

struct Outcome
{
    TaskMetrics metrics;
    ManifestEntry entry;
    std::optional<hist::Aggregator> histogram;
    std::string error;
    bool ok = false;
};

DType dtype_of(expr::Scalar s)
{
    switch (s) {
    case expr::Scalar::I64: return DType::I64;
    case expr::Scalar::F64: return DType::F64;
    case expr::Scalar::Bool: return DType::Bool;
    }
    return DType::F64;
}

class Runner
{
public:
    Runner(const JobSpec& job, const EngineConfig& config, RunOptions& options)
        : job_(job), config_(config), options_(options)
    {
    }

    RunResult run()
    {
        std::vector<std::string> extra;
        if (options_.histogram)
            extra = options_.histogram->columns();
        plan_ = plan(job_, config_, extra);
        prepare();
        if (options_.write_outputs)
            prepare_output_dir();

        outcomes_.resize(plan_.tasks.size());
        const auto workers = config_.workers();
        start_ = Clock::now();
        take_sample();
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([this] { worker_loop(); });
        std::thread sampler([this] { sample_loop(); });
        for (auto& t : pool)
            t.join();
        {
            std::lock_guard lock(sample_mu_);
            done_ = true;
        }
        sample_cv_.notify_all();
        sampler.join();
        const double elapsed = seconds_since(start_);
        take_sample();

        RunResult result;
        std::vector<std::size_t> failed;
        std::string first_error;
        for (auto& o : outcomes_) {
            if (!o.ok) {
                failed.push_back(o.metrics.task_id);
                if (first_error.empty())
                    first_error = o.error;
                continue;
            }
            result.task_metrics.push_back(o.metrics);
            result.manifest.push_back(o.entry);
        }
        if (!failed.empty()) {
            std::string ids;
            for (auto id : failed)
                ids += (ids.empty() ? "" : ", ") + std::to_string(id);
            throw JobFailed(failed, "job failed after retry; tasks [" + ids + "]: " + first_error);
        }
        if (options_.histogram) {
            auto total = options_.histogram->zero();
            for (auto& o : outcomes_)
                total.merge(*o.histogram);
            result.histogram = std::move(total);
        }
        result.metrics = merge_metrics(result.task_metrics, std::move(concurrency_), std::move(throughput_), elapsed,
                                       workers);
        if (options_.write_outputs)
            write_reports(result);
        return result;
    }

private:
    void prepare()
    {
        if (job_.skim)
            prep_.skim = expr::parse(*job_.skim);
        auto schema = plan_.schema;
        for (const auto& d : job_.derived) {
            auto e = expr::parse(d.expr);
            if (!job_.inputs.empty())
                schema[d.name] = {dtype_of(expr::typecheck(*e, plan_.schema).scalar), Shape::Flat};
            prep_.derived.emplace_back(d.name, std::move(e));
        }
        if (options_.histogram && !job_.inputs.empty())
            options_.histogram->check_types(schema);
    }

    void prepare_output_dir()
    {
        if (job_.output.empty())
            throw JobError("job has no output directory");
        fs::create_directories(job_.output);
        for (const auto& entry : fs::directory_iterator(job_.output)) {
            auto name = entry.path().filename().string();
            if (name.starts_with("part-") && (name.ends_with(".trf") || name.ends_with(".tmp")))
                fs::remove(entry.path());
        }
    }

    void worker_loop()
    {
        for (;;) {
            auto i = next_.fetch_add(1);
            if (i >= plan_.tasks.size())
                return;
            const auto& task = plan_.tasks[i];
            active_ += 1;
            auto& out = outcomes_[i];
            out.metrics.task_id = task.task_id;
            for (int attempt = 1; attempt <= 2 && !out.ok; ++attempt) {
                try {
                    execute(task, attempt, out);
                    out.ok = true;
                } catch (const std::exception& e) {
                    out.error = e.what();
                    if (options_.write_outputs) {
                        std::error_code ec;
                        fs::remove(job_.output / (output_file_name(task.task_id) + ".tmp"), ec);
                    }
                }
                out.metrics.attempts = attempt;
            }
            active_ -= 1;
        }
    }

    void execute(const Task& task, int attempt, Outcome& out)
    {
        const auto t0 = Clock::now();
        auto raw = open_input(task.input, config_);
        auto source = std::make_shared<MeteredSource>(raw, fetched_);
        auto reader = TreeFileReader::open(source);

        ReadStats rs;
        std::vector<ColumnChunk> chunks;
        chunks.reserve(task.required.size());
        for (const auto& name : task.required)
            chunks.push_back(reader.read_branch(task.tree, name, task.range, &rs));

        expr::ColumnSet input(task.range);
        for (std::size_t c = 0; c < chunks.size(); ++c)
            input.add(task.required[c], &chunks[c]);

        std::vector<ColumnChunk> selected;
        std::uint64_t n_out = task.range.size();
        if (prep_.skim) {
            auto mask = expr::evaluate_mask(*prep_.skim, input);
            n_out = static_cast<std::uint64_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
            selected.reserve(chunks.size());
            for (const auto& c : chunks)
                selected.push_back(c.select(mask));
        } else {
            selected = std::move(chunks);
            for (auto& c : selected)
                c.range = {0, n_out};
        }
        expr::ColumnSet sel(EntryRange{0, n_out});
        for (std::size_t c = 0; c < selected.size(); ++c)
            sel.add(task.required[c], &selected[c]);

        std::vector<ColumnChunk> derived;
        derived.reserve(prep_.derived.size());
        for (const auto& [name, e] : prep_.derived)
            derived.push_back(expr::to_chunk(expr::evaluate(*e, sel), 0));

        if (options_.histogram) {
            expr::ColumnSet hs(EntryRange{0, n_out});
            for (std::size_t c = 0; c < selected.size(); ++c)
                hs.add(task.required[c], &selected[c]);
            for (std::size_t d = 0; d < derived.size(); ++d)
                hs.add(prep_.derived[d].first, &derived[d]);
            out.histogram = options_.histogram->zero();
            out.histogram->fill(hs);
        }

        if (options_.fault_injector)
            options_.fault_injector(task, attempt);

        std::uint64_t out_bytes = 0;
        const auto file_name = output_file_name(task.task_id);
        if (options_.write_outputs) {
            TreeData tree;
            tree.name = job_.tree;
            for (const auto& k : job_.keep) {
                auto pos = std::find(task.required.begin(), task.required.end(), k) - task.required.begin();
                tree.branches.push_back({k, selected[static_cast<std::size_t>(pos)]});
            }
            for (std::size_t d = 0; d < derived.size(); ++d)
                tree.branches.push_back({prep_.derived[d].first, std::move(derived[d])});
            auto final_path = job_.output / file_name;
            auto tmp_path = job_.output / (file_name + ".tmp");
            {
                FileSink sink(tmp_path);
                write_tree(sink, tree);
                out_bytes = sink.position();
            }
            fs::rename(tmp_path, final_path);
        }

        auto io = raw->stats();
        auto& m = out.metrics;
        m.wall_s = seconds_since(t0);
        m.read_s = io.read_time_s;
        m.decompress_s = rs.decompress_time_s;
        m.cpu_s = std::max(0.0, m.wall_s - m.read_s - m.decompress_s);
        m.entries_in = task.range.size();
        m.entries_out = n_out;
        m.bytes_fetched = io.bytes_fetched;
        m.bytes_requested = io.bytes_requested;

        out.entry = ManifestEntry{task.task_id, file_name, task.input, task.range, n_out, out_bytes};
    }

    void take_sample()
    {
        const double t = seconds_since(start_);
        const auto bytes = fetched_.load();
        concurrency_.push_back({t, static_cast<double>(active_.load())});
        const double dt = t - last_sample_t_;
        throughput_.push_back({t, dt > 0 ? static_cast<double>(bytes - last_sample_bytes_) / dt : 0.0});
        last_sample_t_ = t;
        last_sample_bytes_ = bytes;
    }

    void sample_loop()
    {
        const auto interval = std::chrono::duration_cast<Clock::duration>(
            std::chrono::duration<double>(std::max(config_.sample_interval_s, 1e-4)));
        auto next = start_;
        std::unique_lock lock(sample_mu_);
        for (;;) {
            next += interval;
            if (sample_cv_.wait_until(lock, next, [this] { return done_; }))
                return;
            take_sample();
        }
    }

    void write_reports(const RunResult& result)
    {
        {
            std::ofstream m(job_.output / "manifest.jsonl", std::ios::trunc);
            write_manifest(result.manifest, m);
        }
        {
            std::ofstream m(job_.output / "metrics.jsonl", std::ios::trunc);
            write_metrics_jsonl(result.task_metrics, result.metrics, m);
        }
        {
            std::ofstream m(job_.output / "metrics.csv", std::ios::trunc);
            write_metrics_csv(result.task_metrics, m);
        }
    }

    const JobSpec& job_;
    const EngineConfig& config_;
    RunOptions& options_;
    Plan plan_;
    Prepared prep_;
    std::vector<Outcome> outcomes_;
    std::atomic<std::size_t> next_{0};
    std::atomic<std::size_t> active_{0};
    std::atomic<std::uint64_t> fetched_{0};

    Clock::time_point start_;
    std::mutex sample_mu_;
    std::condition_variable sample_cv_;
    bool done_ = false;
    std::vector<TimelineSample> concurrency_;
    std::vector<TimelineSample> throughput_;
    double last_sample_t_ = 0;
    std::uint64_t last_sample_bytes_ = 0;
};

}  // namespace

RunResult run(const JobSpec& job, const EngineConfig& config, RunOptions options)
{
    return Runner(job, config, options).run();
}

void write_manifest(const std::vector<ManifestEntry>& manifest, std::ostream& out)
{
    for (const auto& e : manifest) {
        nlohmann::json j{{"task_id", e.task_id},         {"file", e.file},       {"input", e.input},
                         {"first", e.range.first},       {"last", e.range.last}, {"entries", e.entries},
                         {"bytes", e.bytes}};
        out << j.dump() << '\n';
    }
}

std::vector<ManifestEntry> read_manifest(const fs::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw JobError("cannot read manifest " + file.string());
    std::vector<ManifestEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        try {
            auto j = nlohmann::json::parse(line);
            ManifestEntry e;
            e.task_id = j.at("task_id").get<std::size_t>();
            e.file = j.at("file").get<std::string>();
            e.input = j.at("input").get<std::string>();
            e.range = {j.at("first").get<std::uint64_t>(), j.at("last").get<std::uint64_t>()};
            e.entries = j.at("entries").get<std::uint64_t>();
            e.bytes = j.at("bytes").get<std::uint64_t>();
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw JobError("manifest " + file.string() + ": " + ex.what());
        }
    }
    return out;
}

}  // namespace treeduce::engine

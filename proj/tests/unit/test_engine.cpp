#include "doctest.h"

#include "support/muon_tree.hpp"
#include "support/naive_reduce.hpp"
#include "support/random_tree.hpp"
#include "support/temp_dir.hpp"
#include "treeduce/engine.hpp"
#include "treeduce/xrdlite.hpp"

#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

using namespace treeduce;
using namespace treeduce::engine;
using treeduce::testing::TempDir;

namespace {

void write_trf(const std::filesystem::path& p, const TreeData& t, std::uint32_t basket = 512)
{
    WriteOptions o;
    o.basket_target_entries = basket;
    FileSink sink(p);
    write_tree(sink, t, o);
}

TreeData counter_tree(std::uint64_t n)
{
    std::vector<std::int32_t> v(n);
    for (std::uint64_t i = 0; i < n; ++i)
        v[i] = static_cast<std::int32_t>(i);
    TreeData t;
    t.name = "Events";
    t.branches.push_back({"x", ColumnChunk::flat(v)});
    return t;
}

/// Reads every part listed in the manifest, in manifest order, into one tree.
TreeData read_outputs(const std::filesystem::path& dir)
{
    TreeData all;
    all.name = "Events";
    bool first = true;
    for (const auto& e : read_manifest(dir / "manifest.jsonl")) {
        auto r = TreeFileReader::open(std::make_shared<FileSource>(dir / e.file));
        const auto& meta = r.tree("Events");
        REQUIRE(meta.n_entries == e.entries);
        for (std::size_t i = 0; i < meta.branches.size(); ++i) {
            auto c = r.read_branch("Events", meta.branches[i].name, {0, meta.n_entries});
            if (first)
                all.branches.push_back({meta.branches[i].name, c});
            else
                all.branches[i].column.append(c);
        }
        first = false;
    }
    return all;
}

struct Dataset
{
    TempDir dir;
    std::vector<TreeData> trees;
    std::vector<std::string> paths;

    Dataset(std::size_t files, std::uint64_t entries, std::uint64_t seed = 1)
    {
        for (std::size_t f = 0; f < files; ++f) {
            trees.push_back(treeduce::testing::muon_tree(seed + f, entries));
            auto p = dir / ("in" + std::to_string(f) + ".trf");
            write_trf(p, trees.back());
            paths.push_back(p.string());
        }
    }
};

const std::vector<std::string> kKeep{"nMuon", "Muon_pt", "Muon_eta", "MET", "flag"};
const std::string kSkim = "nMuon >= 2 && max(Muon_pt) > 20";
const std::vector<DerivedColumn> kDerived{{"leading_pt", "max(Muon_pt)"},
                                          {"n_pos", "count(Muon_charge) + sum(Muon_charge) / 2"},
                                          {"central", "abs(max(Muon_eta)) < 1.2 && flag == false"},
                                          {"met_ratio", "MET / (sum(Muon_pt) + 1)"}};

JobSpec demo_job(const Dataset& d, const std::filesystem::path& out, std::uint64_t partition = 997)
{
    JobSpec job;
    job.inputs = d.paths;
    job.keep = kKeep;
    job.skim = kSkim;
    job.derived = kDerived;
    job.output = out;
    job.partition_entries = partition;
    return job;
}

std::vector<std::string> derived_exprs(const JobSpec& job)
{
    std::vector<std::string> out;
    for (const auto& d : job.derived)
        out.push_back(d.expr);
    return out;
}

std::vector<std::string> derived_names(const JobSpec& job)
{
    std::vector<std::string> out;
    for (const auto& d : job.derived)
        out.push_back(d.name);
    return out;
}

EngineConfig workers(std::size_t executors, std::size_t cores)
{
    EngineConfig c;
    c.executors = executors;
    c.cores_per_executor = cores;
    return c;
}

}  // namespace

TEST_CASE("plan splits each file by partition_entries")
{
    TempDir dir;
    write_trf(dir / "a.trf", counter_tree(10));
    write_trf(dir / "b.trf", counter_tree(10));
    JobSpec job;
    job.inputs = {(dir / "a.trf").string(), (dir / "b.trf").string()};
    job.keep = {"x"};
    job.partition_entries = 4;
    auto p = plan(job, {});
    REQUIRE(p.tasks.size() == 6);
    const std::vector<EntryRange> expect{{0, 4}, {4, 8}, {8, 10}};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(p.tasks[i].task_id == i);
        CHECK(p.tasks[i].input_index == i / 3);
        CHECK(p.tasks[i].range == expect[i % 3]);
    }
}

TEST_CASE("required columns come from the expression trees")
{
    JobSpec job;
    job.keep = {"MET"};
    job.skim = "max(Muon_pt)>20";
    CHECK(required_columns(job) == std::vector<std::string>{"MET", "Muon_pt"});
    job.derived = {{"lead", "max(Muon_eta) * nMuon"}};
    CHECK(required_columns(job) == std::vector<std::string>{"MET", "Muon_eta", "Muon_pt", "nMuon"});
    CHECK(required_columns(job, {"lead", "run"}) ==
          std::vector<std::string>{"MET", "Muon_eta", "Muon_pt", "nMuon", "run"});
}

TEST_CASE("an empty input list gives an empty plan and an empty manifest")
{
    TempDir dir;
    JobSpec job;
    job.keep = {"x"};
    job.output = dir / "out";
    CHECK(plan(job, {}).tasks.empty());
    auto r = run(job, {});
    CHECK(r.manifest.empty());
    CHECK(r.metrics.tasks == 0);
    CHECK(r.metrics.totals.wall_s == 0);
    CHECK(read_manifest(dir / "out/manifest.jsonl").empty());
}

TEST_CASE("plan rejects inconsistent schemas and bad expressions")
{
    TempDir dir;
    write_trf(dir / "a.trf", counter_tree(5));
    auto other = counter_tree(5);
    other.branches[0].column = ColumnChunk::flat(std::vector<double>(5, 1.0));
    write_trf(dir / "b.trf", other);
    auto missing = counter_tree(5);
    missing.branches[0].name = "y";
    write_trf(dir / "c.trf", missing);

    JobSpec job;
    job.keep = {"x"};
    job.inputs = {(dir / "a.trf").string(), (dir / "b.trf").string()};
    CHECK_THROWS_AS(plan(job, {}), JobError);
    job.inputs = {(dir / "a.trf").string(), (dir / "c.trf").string()};
    CHECK_THROWS_AS(plan(job, {}), JobError);
    job.inputs = {(dir / "a.trf").string()};
    job.skim = "x + 1";
    CHECK_THROWS_AS(plan(job, {}), expr::ExprError);
    job.skim.reset();
    job.derived = {{"d", "x * 2"}};
    CHECK_NOTHROW(plan(job, {}));
    job.tree = "Other";
    CHECK_THROWS_AS(plan(job, {}), JobError);
    job.tree = "Events";
    job.keep = {"nope"};
    CHECK_THROWS_AS(plan(job, {}), JobError);
}

TEST_CASE("jagged derived columns are rejected")
{
    Dataset d(1, 50);
    JobSpec job;
    job.inputs = d.paths;
    job.keep = {"MET"};
    job.derived = {{"twice", "Muon_pt * 2"}};
    CHECK_THROWS_AS(plan(job, {}), JobError);
}

TEST_CASE("job files parse with quoting and relative paths")
{
    auto job = parse_job(R"JOB(
# demo
inputs = data/a.trf, /abs/b.trf , xrdl://host:1/c.trf
tree = Events
keep = nMuon, Muon_pt
skim = "nMuon >= 2 && max(Muon_pt) > 20"
derive.leading_pt = "max(Muon_pt)"
output = out
partition_entries = 128
)JOB",
                         "/base/dir");
    CHECK(job.inputs == std::vector<std::string>{"/base/dir/data/a.trf", "/abs/b.trf", "xrdl://host:1/c.trf"});
    CHECK(job.keep == std::vector<std::string>{"nMuon", "Muon_pt"});
    CHECK(*job.skim == "nMuon >= 2 && max(Muon_pt) > 20");
    REQUIRE(job.derived.size() == 1);
    CHECK(job.derived[0].name == "leading_pt");
    CHECK(job.output == "/base/dir/out");
    CHECK(job.partition_entries == 128);

    for (const char* bad : {"keep = a\nkeep = b", "bogus = 1", "keep a", "keep = a\npartition_entries = 0",
                            "keep = a\nderive.a = \"1\"", "keep = a, , b", "skim = \"x", "inputs = x"})
        CHECK_THROWS_AS(parse_job(bad), JobError);
}

TEST_CASE("skim true with every column kept reproduces the input")
{
    TempDir dir;
    std::mt19937_64 rng(12);
    std::vector<TreeData> trees;
    JobSpec job;
    trees.push_back(treeduce::testing::random_tree(rng, "Events", 400));
    for (int f = 1; f < 3; ++f) {
        TreeData t;
        t.name = "Events";
        std::uint64_t n = rng() % 400;
        for (const auto& b : trees[0].branches)
            t.branches.push_back({b.name, treeduce::testing::random_column(rng, b.column.dtype, b.column.shape, n)});
        trees.push_back(std::move(t));
    }
    for (std::size_t f = 0; f < trees.size(); ++f) {
        auto p = dir / ("in" + std::to_string(f) + ".trf");
        write_trf(p, trees[f], 64);
        job.inputs.push_back(p.string());
    }
    for (const auto& b : trees[0].branches)
        job.keep.push_back(b.name);
    job.skim = "true";
    job.output = dir / "out";
    job.partition_entries = 37;
    auto r = run(job, workers(2, 2));

    auto out_file = dir / "all.trf";
    auto n = concat_outputs({job.output}, out_file);
    std::uint64_t total = 0;
    for (const auto& t : trees)
        total += t.n_entries();
    CHECK(n == total);
    auto merged = TreeFileReader::open(std::make_shared<FileSource>(out_file));
    for (std::size_t b = 0; b < job.keep.size(); ++b) {
        auto expect = trees[0].branches[b].column;
        for (std::size_t f = 1; f < trees.size(); ++f)
            expect.append(trees[f].branches[b].column);
        CHECK(merged.read_branch("Events", job.keep[b], {0, total}).same_content(expect));
    }
}

TEST_CASE("skim false writes valid empty outputs")
{
    Dataset d(2, 300);
    auto job = demo_job(d, d.dir / "out", 100);
    job.skim = "false";
    auto r = run(job, workers(1, 3));
    CHECK(r.manifest.size() == 6);
    for (const auto& e : r.manifest) {
        CHECK(e.entries == 0);
        auto reader = TreeFileReader::open(std::make_shared<FileSource>(job.output / e.file));
        CHECK(reader.tree("Events").n_entries == 0);
        CHECK(reader.tree("Events").branches.size() == kKeep.size() + kDerived.size());
    }
    CHECK(r.metrics.totals.entries_out == 0);
    CHECK(r.metrics.totals.entries_in == 600);
}

TEST_CASE("output equals the per-event oracle for any worker count")
{
    Dataset d(3, 4000, 21);
    auto expect = treeduce::testing::naive_reduce(d.trees, kKeep, kSkim, derived_exprs(demo_job(d, {})));
    REQUIRE(expect.size() > 100);
    for (auto [e, c] : {std::pair{1, 1}, {1, 2}, {2, 4}}) {
        auto job = demo_job(d, d.dir / ("out" + std::to_string(e * c)));
        auto r = run(job, workers(static_cast<std::size_t>(e), static_cast<std::size_t>(c)));
        auto rows = treeduce::testing::output_rows(read_outputs(job.output), kKeep, derived_names(job));
        CHECK_MESSAGE(rows == expect, "workers " << e * c);
        CHECK(r.metrics.totals.entries_out == expect.size());
        CHECK(r.metrics.workers == static_cast<std::size_t>(e * c));
    }
}

TEST_CASE("one transient fault per task is retried transparently")
{
    Dataset d(2, 3000, 5);
    auto job = demo_job(d, d.dir / "out", 500);
    std::mutex mu;
    std::map<std::size_t, int> calls;
    RunOptions opt;
    opt.fault_injector = [&](const Task& t, int attempt) {
        std::lock_guard lock(mu);
        calls[t.task_id] += 1;
        if (attempt == 1)
            throw std::runtime_error("injected");
    };
    auto r = run(job, workers(2, 2), opt);
    CHECK(calls.size() == 12);
    for (auto& [id, n] : calls)
        CHECK(n == 2);
    for (const auto& m : r.task_metrics)
        CHECK(m.attempts == 2);
    auto expect = treeduce::testing::naive_reduce(d.trees, kKeep, kSkim, derived_exprs(job));
    CHECK(treeduce::testing::output_rows(read_outputs(job.output), kKeep, derived_names(job)) == expect);
    for (const auto& e : std::filesystem::directory_iterator(job.output))
        CHECK_FALSE(e.path().extension() == ".tmp");
}

TEST_CASE("a task failing twice fails the job and names the task")
{
    Dataset d(1, 1000);
    auto job = demo_job(d, d.dir / "out", 250);
    std::atomic<int> calls{0};
    RunOptions opt;
    opt.fault_injector = [&](const Task& t, int) {
        if (t.task_id == 2) {
            calls += 1;
            throw std::runtime_error("disk on fire");
        }
    };
    try {
        run(job, workers(1, 2), opt);
        FAIL("job succeeded");
    } catch (const JobFailed& e) {
        CHECK(e.failed_tasks() == std::vector<std::size_t>{2});
        CHECK(std::string(e.what()).find("disk on fire") != std::string::npos);
    }
    CHECK(calls == 2);
}

TEST_CASE("merge_metrics sums and fractions")
{
    TaskMetrics one;
    one.wall_s = 10;
    one.cpu_s = 4;
    one.read_s = 5;
    one.decompress_s = 1;
    auto w = merge_metrics({one});
    CHECK(w.cpu_fraction() == doctest::Approx(0.4));
    CHECK(w.read_fraction() == doctest::Approx(0.5));
    CHECK(w.decompress_fraction() == doctest::Approx(0.1));

    auto zero = merge_metrics({});
    CHECK(zero.totals.wall_s == 0);
    CHECK(zero.cpu_fraction() == 0);
    CHECK(zero.concurrency.empty());
    CHECK(zero.throughput.empty());

    std::vector<TaskMetrics> three(3);
    for (int i = 0; i < 3; ++i) {
        three[i].task_id = static_cast<std::size_t>(i);
        three[i].wall_s = 1.5 * (i + 1);
        three[i].cpu_s = 0.5 * (i + 1);
        three[i].read_s = 0.25 * (i + 1);
        three[i].entries_in = 100u * static_cast<unsigned>(i + 1);
        three[i].entries_out = 10u * static_cast<unsigned>(i + 1);
        three[i].bytes_fetched = 1000u * static_cast<unsigned>(i + 1);
    }
    auto s = merge_metrics(three);
    CHECK(s.tasks == 3);
    CHECK(s.totals.wall_s == doctest::Approx(9.0));
    CHECK(s.totals.cpu_s == doctest::Approx(3.0));
    CHECK(s.totals.read_s == doctest::Approx(1.5));
    CHECK(s.totals.entries_in == 600);
    CHECK(s.totals.entries_out == 60);
    CHECK(s.totals.bytes_fetched == 6000);
}

TEST_CASE("run accounting and timelines")
{
    Dataset d(2, 6000, 3);
    auto job = demo_job(d, d.dir / "out", 400);
    auto cfg = workers(2, 2);
    cfg.sample_interval_s = 0.002;
    auto r = run(job, cfg);
    const auto& w = r.metrics;
    CHECK(w.totals.cpu_s + w.totals.read_s <= 1.05 * w.totals.wall_s);
    for (const auto& m : r.task_metrics) {
        CHECK(m.entries_out <= m.entries_in);
        CHECK(m.cpu_s + m.read_s <= m.wall_s * 1.05);
        CHECK(m.bytes_fetched > 0);
    }
    REQUIRE(w.concurrency.size() >= 2);
    for (const auto& s : w.concurrency)
        CHECK(s.value <= 4);
    CHECK(w.concurrency.front().t_s <= 0.01);
    CHECK(w.concurrency.back().t_s >= w.elapsed_s);
    CHECK(w.throughput.size() == w.concurrency.size());
    std::uint64_t fetched = 0;
    for (const auto& m : r.task_metrics)
        fetched += m.bytes_fetched;
    CHECK(w.totals.bytes_fetched == fetched);

    std::ifstream csv(job.output / "metrics.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "task_id,wall_s,cpu_s,read_s,decompress_s,entries_in,entries_out,bytes_fetched");
    std::size_t lines = 0;
    for (std::string l; std::getline(csv, l);)
        ++lines;
    CHECK(lines == r.task_metrics.size());

    auto table = format_breakdown(w);
    for (const char* row : {"Total execution time", "CPU time", "Read time", "Decompression time"})
        CHECK(table.find(row) != std::string::npos);
}

TEST_CASE("the pool stays saturated when tasks outnumber workers")
{
    Dataset d(1, 40000, 9);
    auto job = demo_job(d, d.dir / "out", 1000);
    auto cfg = workers(1, 4);
    cfg.sample_interval_s = 0.001;
    auto r = run(job, cfg);
    REQUIRE(r.manifest.size() >= 8 * cfg.workers());
    MESSAGE("full concurrency fraction " << r.metrics.full_concurrency_fraction());
    CHECK(r.metrics.full_concurrency_fraction() >= 0.7);
}

TEST_CASE("inputs served over xrdl give the same result as local files")
{
    Dataset d(2, 2000, 17);
    xrdl::ServerConfig sc;
    sc.root_dir = d.dir.path();
    sc.port = 0;
    xrdl::Server server(sc);
    auto local = demo_job(d, d.dir / "local", 300);
    auto remote = local;
    remote.output = d.dir / "remote";
    remote.inputs.clear();
    for (std::size_t f = 0; f < d.paths.size(); ++f)
        remote.inputs.push_back("xrdl://127.0.0.1:" + std::to_string(server.port()) + "/in" + std::to_string(f) +
                                ".trf");
    auto cfg = workers(1, 2);
    cfg.read_ahead = 4096;
    run(local, cfg);
    auto r = run(remote, cfg);
    auto a = read_outputs(local.output), b = read_outputs(remote.output);
    REQUIRE(a.branches.size() == b.branches.size());
    for (std::size_t i = 0; i < a.branches.size(); ++i)
        CHECK(a.branches[i].column.same_content(b.branches[i].column));
    CHECK(r.metrics.totals.bytes_fetched > 0);
    CHECK(r.metrics.totals.read_s > 0);
}

TEST_CASE("histograms fill with selected events and may use derived columns")
{
    Dataset d(2, 3000, 4);
    auto job = demo_job(d, d.dir / "out", 700);
    RunOptions opt;
    opt.histogram = hist::parse_spec("bin(40, 0, 200, 'max(Muon_pt)')");
    auto r = run(job, workers(1, 3), opt);
    REQUIRE(r.histogram);
    CHECK(r.histogram->entries() == static_cast<double>(r.metrics.totals.entries_out));
    CHECK(r.histogram->conserved());

    RunOptions opt2;
    opt2.histogram = hist::parse_spec("bin(40, 0, 200, 'leading_pt', sum('met_ratio'))");
    opt2.write_outputs = false;
    auto r2 = run(job, workers(2, 1), opt2);
    const auto& b1 = std::get<hist::Bin>(r.histogram->node());
    const auto& b2 = std::get<hist::Bin>(r2.histogram->node());
    for (std::size_t i = 0; i < 40; ++i)
        CHECK(b1.values[i].entries() == b2.values[i].entries());

    RunOptions bad;
    bad.histogram = hist::parse_spec("bin(4, 0, 4, 'Muon_pt')");
    CHECK_THROWS_AS(run(job, {}, bad), hist::HistError);
}

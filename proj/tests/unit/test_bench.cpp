#include "doctest.h"

#include "support/temp_dir.hpp"
#include "treeduce/bench.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace treeduce;
using namespace treeduce::bench;
using treeduce::testing::TempDir;

namespace {

GenSpec small_spec(std::uint64_t events, std::size_t files)
{
    GenSpec s;
    s.n_events = events;
    s.n_files = files;
    s.basket_target_entries = 1024;
    return s;
}

BenchConfig small_bench(const TempDir& dir)
{
    BenchConfig cfg;
    cfg.dataset_dir = dir / "data";
    cfg.gen = small_spec(30000, 4);
    cfg.multiples = {1, 2, 4};
    cfg.worker_configs = {{1, 1}, {1, 2}};
    cfg.read_aheads = {64u << 10, 1u << 20, 32u << 20};
    cfg.repetitions = 1;
    cfg.bandwidth_cap = 1'000'000'000;
    cfg.readahead_cap = 1'000'000'000;
    cfg.core_files = 2;
    cfg.readahead_files = 1;
    cfg.partition_entries = 8192;
    return cfg;
}

}  // namespace

TEST_CASE("SplitMix64 matches the reference sequence")
{
    SplitMix64 r(0);
    CHECK(r.next() == 0xE220A8397B1DCDAFull);
    CHECK(r.next() == 0x6E789E6AA1B965F4ull);
    CHECK(r.next() == 0x06C45D188009454Full);
    SplitMix64 a(file_stream_key(1, 0)), b(file_stream_key(1, 1));
    CHECK(a.next() != b.next());
    SplitMix64 u(7);
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        CHECK((x >= 0.0 && x < 1.0));
    }
}

TEST_CASE("Poisson inverse CDF follows the probability mass function")
{
    CHECK(poisson_inverse_cdf(0.0, 2.0) == 0);
    CHECK(poisson_inverse_cdf(std::nextafter(std::exp(-2.0), 0.0), 2.0) == 0);
    CHECK(poisson_inverse_cdf(std::exp(-2.0), 2.0) == 1);
    // Grid of u values: the share landing on k equals the mass of k.
    const int n = 200000;
    std::vector<int> hits(20, 0);
    for (int i = 0; i < n; ++i)
        hits[static_cast<std::size_t>(poisson_inverse_cdf((i + 0.5) / n, 2.0))] += 1;
    double pmf = std::exp(-2.0);
    for (int k = 0; k < 8; ++k) {
        CHECK(hits[static_cast<std::size_t>(k)] / double(n) == doctest::Approx(pmf).epsilon(0.001));
        pmf *= 2.0 / (k + 1);
    }
}

TEST_CASE("same seed gives byte-identical files")
{
    TempDir dir;
    auto spec = small_spec(5000, 2);
    auto a = generate(spec, dir / "a");
    auto b = generate(spec, dir / "b");
    REQUIRE(a.files.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(testing::read_file(dir / "a" / a.files[i].name) == testing::read_file(dir / "b" / b.files[i].name));
    spec.seed = 2;
    auto c = generate(spec, dir / "c");
    CHECK(testing::read_file(dir / "a" / a.files[0].name) != testing::read_file(dir / "c" / c.files[0].name));
}

TEST_CASE("nMuon mean for seed 1 and a thousand events")
{
    auto t = generate_tree(small_spec(1000, 1), 0);
    const auto& n = t.branches[0].column.as<std::int32_t>();
    double mean = 0;
    for (auto v : n)
        mean += v;
    mean /= static_cast<double>(n.size());
    MESSAGE("mean nMuon " << mean);
    CHECK(mean >= 1.7);
    CHECK(mean <= 2.3);
}

TEST_CASE("generated columns respect the schema and ranges")
{
    auto t = generate_tree(small_spec(5000, 1), 3);
    REQUIRE(t.branches.size() == 6);
    const std::vector<std::string> names{"nMuon", "Muon_pt", "Muon_eta", "Muon_phi", "Muon_charge", "MET"};
    for (std::size_t i = 0; i < names.size(); ++i)
        CHECK(t.branches[i].name == names[i]);
    const auto& n = t.branches[0].column.as<std::int32_t>();
    for (std::size_t b = 1; b <= 4; ++b) {
        const auto& off = t.branches[b].column.offsets;
        for (std::size_t i = 0; i < n.size(); ++i)
            REQUIRE(off[i + 1] - off[i] == static_cast<std::uint64_t>(n[i]));
    }
    for (auto v : n)
        CHECK(v >= 0);
    for (auto v : t.branches[1].column.as<float>())
        REQUIRE(v >= 3.0f);
    for (auto v : t.branches[2].column.as<float>())
        REQUIRE(std::abs(v) <= 2.5f);
    for (auto v : t.branches[3].column.as<float>())
        REQUIRE((v >= -std::numbers::pi_v<float> && v <= std::numbers::pi_v<float>));
    for (auto v : t.branches[4].column.as<std::int32_t>())
        REQUIRE((v == 1 || v == -1));
    for (auto v : t.branches[5].column.as<double>())
        REQUIRE(v >= 0.0);
}

TEST_CASE("first event follows the documented draw order")
{
    GenSpec spec = small_spec(1, 1);
    spec.seed = 42;
    auto t = generate_tree(spec, 0);
    SplitMix64 rng(file_stream_key(42, 0));
    auto k = poisson_inverse_cdf(rng.uniform(), 2.0);
    REQUIRE(t.branches[0].column.as<std::int32_t>()[0] == k);
    for (int m = 0; m < k; ++m) {
        CHECK(t.branches[1].column.as<float>()[static_cast<std::size_t>(m)] ==
              static_cast<float>(3.0 - 15.0 * std::log1p(-rng.uniform())));
        CHECK(t.branches[2].column.as<float>()[static_cast<std::size_t>(m)] ==
              static_cast<float>(-2.5 + 5.0 * rng.uniform()));
        CHECK(t.branches[3].column.as<float>()[static_cast<std::size_t>(m)] ==
              static_cast<float>(-std::numbers::pi + 2.0 * std::numbers::pi * rng.uniform()));
        CHECK(t.branches[4].column.as<std::int32_t>()[static_cast<std::size_t>(m)] == (rng.uniform() < 0.5 ? -1 : 1));
    }
    CHECK(t.branches[5].column.as<double>()[0] == -30.0 * std::log1p(-rng.uniform()));
}

TEST_CASE("zero events make a valid empty dataset")
{
    TempDir dir;
    auto d = generate(small_spec(0, 2), dir / "empty");
    REQUIRE(d.files.size() == 2);
    auto r = TreeFileReader::open(std::make_shared<FileSource>(dir / "empty" / d.files[0].name));
    CHECK(r.tree("Events").n_entries == 0);
    auto loaded = load_dataset(dir / "empty");
    REQUIRE(loaded);
    CHECK(loaded->files.size() == 2);
}

TEST_CASE("smaller datasets are prefixes of larger ones")
{
    TempDir dir;
    auto big = generate(small_spec(2000, 4), dir / "big");
    auto small = generate(small_spec(2000, 2), dir / "small");
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(testing::read_file(dir / "big" / big.files[i].name) ==
              testing::read_file(dir / "small" / small.files[i].name));
    auto reuse = ensure_dataset(small_spec(2000, 3), dir / "big");
    CHECK(reuse.files.size() == 3);
    CHECK(reuse.bytes(3) == big.bytes(3));
}

TEST_CASE("Aux branches leave the demo columns untouched")
{
    auto spec = small_spec(3000, 1);
    auto plain = generate_tree(spec, 0);
    spec.extra_flat_branches = 2;
    auto wide = generate_tree(spec, 0);
    REQUIRE(wide.branches.size() == 8);
    CHECK(wide.branches[6].name == "Aux_0");
    CHECK(wide.branches[7].name == "Aux_1");
    for (std::size_t b = 0; b < 6; ++b)
        CHECK(wide.branches[b].column.same_content(plain.branches[b].column));
}

TEST_CASE("least squares and median")
{
    auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(f.slope == doctest::Approx(2));
    CHECK(f.intercept == doctest::Approx(1));
    CHECK(f.r2 == doctest::Approx(1));
    // y = x with residuals +1, -1, -1, +1 around the fitted line.
    auto g = fit_line({0, 1, 2, 3}, {1, 0, 1, 4});
    // Hand computation: slope 1, intercept 0, ss_res 4, ss_tot 9.
    CHECK(g.slope == doctest::Approx(1.0));
    CHECK(g.intercept == doctest::Approx(0.0));
    CHECK(g.r2 == doctest::Approx(1.0 - 4.0 / 9.0));
    CHECK(median({3, 1, 2}) == 2);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    CHECK(median({}) == 0);
}

TEST_CASE("empty experiments render header-only CSVs")
{
    ExperimentReport r;
    std::ostringstream a, b, c;
    write_size_csv(r, a);
    write_core_csv(r, b);
    write_readahead_csv(r, c);
    CHECK(a.str() == "multiple,bytes,median_wall_s,r2\n");
    CHECK(b.str() == "executors,cores,workers,median_wall_s,throughput_Bps,bandwidth_cap_Bps\n");
    CHECK(c.str() == "read_ahead,bytes_requested,bytes_fetched,amplification,median_wall_s\n");
}

TEST_CASE("reports re-render to the same bytes")
{
    ExperimentReport r;
    r.experiment = "readahead";
    r.bandwidth_cap_Bps = 123456;
    r.readahead_rows.push_back({65536, 1000, 70000, 0.25, {0.25, 0.3, 0.2}});
    r.readahead_rows.push_back({1u << 25, 1000, 1u << 26, 1.5, {1.5}});
    r.breakdown = Breakdown{10, 4, 5, 0.75};
    r.outputs_identical = true;
    auto back = report_from_json(to_json(r));
    CHECK(render_summary(back) == render_summary(r));
    std::ostringstream a, b;
    write_readahead_csv(r, a);
    write_readahead_csv(back, b);
    CHECK(a.str() == b.str());
    CHECK(to_json(back) == to_json(r));
    auto summary = render_summary(r);
    CHECK(summary.find("| CPU time | 4 | 0.4 |") != std::string::npos);
    CHECK(summary.find("| Read time | 5 | 0.5 |") != std::string::npos);
}

TEST_CASE("bench config parsing")
{
    auto cfg = parse_bench_config(R"(
dataset = data
seed = 5
events_per_file = 1000
files = 3
multiples = 1, 2
workers = 1x1, 2x4
read_ahead = 64KiB, 1MiB, 32MiB
repetitions = 5
bandwidth_cap = auto
readahead_cap = 1000000
)",
                                  "/b");
    CHECK(cfg.dataset_dir == "/b/data");
    CHECK(cfg.gen.seed == 5);
    CHECK(cfg.gen.n_events == 1000);
    CHECK(cfg.multiples == std::vector<std::size_t>{1, 2});
    CHECK(cfg.worker_configs == std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {2, 4}});
    CHECK(cfg.read_aheads == std::vector<std::uint64_t>{65536, 1048576, 33554432});
    CHECK(cfg.repetitions == 5);
    CHECK(cfg.bandwidth_cap == 0);
    CHECK(cfg.readahead_cap == 1000000);
    CHECK_THROWS_AS(parse_bench_config("repetitions = 0"), engine::JobError);
    CHECK_THROWS_AS(parse_bench_config("workers = 4"), engine::JobError);
    CHECK_THROWS_AS(parse_bench_config("colour = blue"), engine::JobError);
}

TEST_CASE("small experiments run end to end")
{
    TempDir dir;
    auto cfg = small_bench(dir);

    auto size = run_size_scaling(cfg, dir / "work");
    REQUIRE(size.complete);
    REQUIRE(size.size_rows.size() == 3);
    CHECK(size.size_rows[1].bytes > size.size_rows[0].bytes);
    CHECK(size.outputs_identical == true);
    REQUIRE(size.breakdown);
    CHECK(size.breakdown->cpu_s + size.breakdown->read_s <= 1.05 * size.breakdown->total_s);

    auto cores = run_core_scaling(cfg, dir / "work");
    REQUIRE(cores.complete);
    CHECK(cores.core_rows.size() == 2);
    CHECK(cores.outputs_identical == true);
    CHECK(cores.single_worker_Bps > 0);

    auto ra = run_readahead_sweep(cfg, dir / "work");
    REQUIRE(ra.complete);
    REQUIRE(ra.readahead_rows.size() == 3);
    CHECK(ra.outputs_identical == true);
    for (const auto& row : ra.readahead_rows)
        CHECK(row.bytes_requested == ra.readahead_rows[0].bytes_requested);
    CHECK(ra.readahead_rows[0].bytes_fetched < ra.readahead_rows[1].bytes_fetched);
    CHECK(ra.readahead_rows[1].bytes_fetched <= ra.readahead_rows[2].bytes_fetched);

    write_report(ra, dir / "report");
    CHECK(std::filesystem::exists(dir / "report/readahead_sweep.csv"));
    CHECK(std::filesystem::exists(dir / "report/summary.md"));
    auto json = testing::read_file(dir / "report/results.json");
    auto back = report_from_json(std::string(json.begin(), json.end()));
    CHECK(render_summary(back) == render_summary(ra));
}

TEST_CASE("a failing job leaves a partial report")
{
    TempDir dir;
    auto cfg = small_bench(dir);
    cfg.gen = small_spec(2000, 1);
    cfg.readahead_files = 1;
    cfg.readahead_keep = "no_such_branch";
    auto ra = run_readahead_sweep(cfg, dir / "work");
    CHECK_FALSE(ra.complete);
    CHECK(ra.error.find("no_such_branch") != std::string::npos);
    write_report(ra, dir / "report");
    auto csv = testing::read_file(dir / "report/readahead_sweep.csv");
    CHECK(std::string(csv.begin(), csv.end()) ==
          "read_ahead,bytes_requested,bytes_fetched,amplification,median_wall_s\n");
}

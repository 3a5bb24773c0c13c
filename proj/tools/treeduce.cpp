#include "treeduce/bench.hpp"
#include "treeduce/engine.hpp"
#include "treeduce/histagg.hpp"
#include "treeduce/xrdlite.hpp"

#include <CLI11.hpp>
#include <csignal>
#include <fstream>
#include <iostream>

using namespace treeduce;

namespace {

void print_manifest_summary(const engine::RunResult& r)
{
    std::uint64_t entries = 0, bytes = 0;
    for (const auto& e : r.manifest) {
        entries += e.entries;
        bytes += e.bytes;
    }
    std::cout << r.manifest.size() << " output files, " << entries << " entries, " << bytes << " bytes\n";
}

void wait_for_signal()
{
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    int sig = 0;
    sigwait(&set, &sig);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"treeduce: columnar event-data reduction toolkit"};
    app.require_subcommand(1);

    // generate
    bench::GenSpec gen;
    std::string gen_out;
    auto* generate = app.add_subcommand("generate", "write a synthetic muon dataset");
    generate->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    generate->add_option("--events", gen.n_events, "events per file")->capture_default_str();
    generate->add_option("--files", gen.n_files, "number of files")->capture_default_str();
    generate->add_option("--basket-entries", gen.basket_target_entries, "entries per basket")->capture_default_str();
    generate->add_option("--extra-branches", gen.extra_flat_branches, "extra flat Aux_k branches")
        ->capture_default_str();
    generate->add_option("--out", gen_out, "output directory")->required();

    // serve
    xrdl::ServerConfig serve_cfg;
    auto* serve = app.add_subcommand("serve", "serve a directory over xrdl");
    serve->add_option("--root", serve_cfg.root_dir, "directory to serve")->required();
    serve->add_option("--port", serve_cfg.port, "listen port (0 picks one)")->capture_default_str();
    serve->add_option("--address", serve_cfg.listen_address, "listen address")->capture_default_str();
    serve->add_option("--cap", serve_cfg.bandwidth_cap, "bandwidth cap in bytes/s (0 = none)")->capture_default_str();

    // reduce and hist share the engine flags
    std::string job_file, out_override;
    engine::EngineConfig ecfg;
    std::uint64_t partition_override = 0;
    auto add_engine_flags = [&](CLI::App* cmd) {
        cmd->add_option("--job", job_file, "job config file")->required();
        cmd->add_option("--executors", ecfg.executors, "executors")->capture_default_str();
        cmd->add_option("--cores", ecfg.cores_per_executor, "cores per executor")->capture_default_str();
        cmd->add_option("--read-ahead", ecfg.read_ahead, "connector read-ahead in bytes")->capture_default_str();
        cmd->add_option("--partition-entries", partition_override, "entries per task (overrides the job)");
    };
    auto* reduce = app.add_subcommand("reduce", "run a skim/slim/derive job");
    add_engine_flags(reduce);
    reduce->add_option("--out", out_override, "output directory (overrides the job)");

    std::string hist_spec, hist_out;
    auto* hist = app.add_subcommand("hist", "fill a histogram with the events a job selects");
    add_engine_flags(hist);
    hist->add_option("--spec", hist_spec, "histogram, e.g. \"bin(40, 0, 200, 'max(Muon_pt)')\"")->required();
    hist->add_option("--out", hist_out, "CSV output file (default stdout)");

    // bench
    std::string experiment, bench_config, bench_out;
    auto* benchcmd = app.add_subcommand("bench", "run a scaling experiment");
    benchcmd->add_option("--experiment", experiment, "size, cores or readahead")
        ->required()
        ->check(CLI::IsMember({"size", "cores", "readahead"}));
    benchcmd->add_option("--config", bench_config, "bench config file");
    benchcmd->add_option("--out", bench_out, "report directory")->required();

    // concat
    std::vector<std::string> concat_dirs;
    std::string concat_out, concat_tree = "Events";
    auto* concat = app.add_subcommand("concat", "merge job outputs in manifest order into one file");
    concat->add_option("dirs", concat_dirs, "job output directories")->required();
    concat->add_option("--out", concat_out, "output TreeFile")->required();
    concat->add_option("--tree", concat_tree, "tree name")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            auto d = bench::generate(gen, gen_out);
            std::cout << "wrote " << d.files.size() << " files, " << d.bytes(d.files.size()) << " bytes to "
                      << gen_out << "\n";
        } else if (*serve) {
            xrdl::Server server(serve_cfg);
            std::cout << "serving " << serve_cfg.root_dir.string() << " on " << serve_cfg.listen_address << ":"
                      << server.port() << std::endl;
            wait_for_signal();
            server.stop();
        } else if (*reduce || *hist) {
            auto job = engine::load_job(job_file);
            if (!out_override.empty())
                job.output = out_override;
            if (partition_override)
                job.partition_entries = partition_override;
            engine::RunOptions opt;
            if (*hist) {
                opt.histogram = hist::parse_spec(hist_spec);
                opt.write_outputs = false;
            }
            auto r = engine::run(job, ecfg, std::move(opt));
            if (*hist) {
                if (hist_out.empty()) {
                    hist::render_csv(*r.histogram, std::cout);
                } else {
                    std::ofstream out(hist_out);
                    hist::render_csv(*r.histogram, out);
                    std::cout << "histogram with " << r.histogram->entries() << " entries written to " << hist_out
                              << "\n";
                }
                std::cerr << engine::format_breakdown(r.metrics);
            } else {
                print_manifest_summary(r);
                std::cout << engine::format_breakdown(r.metrics);
            }
        } else if (*benchcmd) {
            auto cfg = bench_config.empty() ? bench::BenchConfig{} : bench::load_bench_config(bench_config);
            bench::ExperimentReport report;
            auto work = std::filesystem::path(bench_out) / "work";
            if (experiment == "size")
                report = bench::run_size_scaling(cfg, work);
            else if (experiment == "cores")
                report = bench::run_core_scaling(cfg, work);
            else
                report = bench::run_readahead_sweep(cfg, work);
            bench::write_report(report, bench_out);
            std::cout << bench::render_summary(report);
            if (!report.complete) {
                std::cerr << "treeduce: experiment aborted: " << report.error << "\n";
                return 1;
            }
        } else if (*concat) {
            std::vector<std::filesystem::path> dirs(concat_dirs.begin(), concat_dirs.end());
            auto n = engine::concat_outputs(dirs, concat_out, concat_tree);
            std::cout << "wrote " << n << " entries to " << concat_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "treeduce: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "treeduce/bench.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

namespace treeduce::bench {

namespace {

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string csv_name(const std::string& experiment)
{
    if (experiment == "size")
        return "size_scaling.csv";
    if (experiment == "cores")
        return "core_scaling.csv";
    if (experiment == "readahead")
        return "readahead_sweep.csv";
    throw engine::JobError("unknown experiment '" + experiment + "'");
}

}  // namespace

void write_size_csv(const ExperimentReport& r, std::ostream& out)
{
    out << "multiple,bytes,median_wall_s,r2\n";
    for (const auto& row : r.size_rows)
        out << row.multiple << ',' << row.bytes << ',' << num(row.median_wall_s) << ',' << num(r.r2) << '\n';
}

void write_core_csv(const ExperimentReport& r, std::ostream& out)
{
    out << "executors,cores,workers,median_wall_s,throughput_Bps,bandwidth_cap_Bps\n";
    for (const auto& row : r.core_rows)
        out << row.executors << ',' << row.cores << ',' << row.executors * row.cores << ','
            << num(row.median_wall_s) << ',' << num(row.throughput_Bps) << ',' << row.bandwidth_cap_Bps << '\n';
}

void write_readahead_csv(const ExperimentReport& r, std::ostream& out)
{
    out << "read_ahead,bytes_requested,bytes_fetched,amplification,median_wall_s\n";
    for (const auto& row : r.readahead_rows)
        out << row.read_ahead << ',' << row.bytes_requested << ',' << row.bytes_fetched << ','
            << num(row.amplification()) << ',' << num(row.median_wall_s) << '\n';
}

std::string render_summary(const ExperimentReport& r)
{
    std::ostringstream md;
    md << "# Experiment: " << r.experiment << "\n\n";
    if (!r.complete)
        md << "**Incomplete:** " << r.error << "\n\n";

    if (r.experiment == "size") {
        md << "| multiple | bytes | median wall (s) |\n|---:|---:|---:|\n";
        for (const auto& row : r.size_rows)
            md << "| " << row.multiple << " | " << row.bytes << " | " << num(row.median_wall_s) << " |\n";
        md << "\nLeast-squares fit: wall = " << num(r.slope_s_per_byte) << " s/B * bytes + " << num(r.intercept_s)
           << " s, R^2 = " << num(r.r2) << "\n\n";
    } else if (r.experiment == "cores") {
        md << "Single-worker throughput: " << num(r.single_worker_Bps) << " B/s; bandwidth cap: "
           << r.bandwidth_cap_Bps << " B/s\n\n";
        md << "| executors x cores | workers | median wall (s) | throughput (B/s) | throughput / cap |\n"
              "|---|---:|---:|---:|---:|\n";
        for (const auto& row : r.core_rows)
            md << "| " << row.executors << "x" << row.cores << " | " << row.executors * row.cores << " | "
               << num(row.median_wall_s) << " | " << num(row.throughput_Bps) << " | "
               << num(row.bandwidth_cap_Bps ? row.throughput_Bps / static_cast<double>(row.bandwidth_cap_Bps) : 0)
               << " |\n";
        md << '\n';
    } else {
        md << "Bandwidth cap: " << r.bandwidth_cap_Bps << " B/s\n\n";
        md << "| read_ahead | bytes requested | bytes fetched | amplification | median wall (s) |\n"
              "|---:|---:|---:|---:|---:|\n";
        for (const auto& row : r.readahead_rows)
            md << "| " << row.read_ahead << " | " << row.bytes_requested << " | " << row.bytes_fetched << " | "
               << num(row.amplification()) << " | " << num(row.median_wall_s) << " |\n";
        md << '\n';
    }

    if (r.breakdown) {
        const auto& b = *r.breakdown;
        auto frac = [&](double v) { return num(b.total_s > 0 ? v / b.total_s : 0.0); };
        md << "## Workload breakdown (last run, summed over tasks)\n\n"
              "| Metric | Total time spent (s) | Fraction |\n|---|---:|---:|\n";
        md << "| Total execution time | " << num(b.total_s) << " | " << (b.total_s > 0 ? "1" : "0") << " |\n";
        md << "| CPU time | " << num(b.cpu_s) << " | " << frac(b.cpu_s) << " |\n";
        md << "| Read time | " << num(b.read_s) << " | " << frac(b.read_s) << " |\n";
        md << "| Decompression time (in place of garbage collection) | " << num(b.decompress_s) << " | "
           << frac(b.decompress_s) << " |\n\n";
    }
    if (r.outputs_identical)
        md << "Output content identical across configurations: " << (*r.outputs_identical ? "yes" : "NO") << "\n";
    return md.str();
}

std::string to_json(const ExperimentReport& r)
{
    nlohmann::json j;
    j["experiment"] = r.experiment;
    j["complete"] = r.complete;
    j["error"] = r.error;
    j["r2"] = r.r2;
    j["slope_s_per_byte"] = r.slope_s_per_byte;
    j["intercept_s"] = r.intercept_s;
    j["single_worker_Bps"] = r.single_worker_Bps;
    j["bandwidth_cap_Bps"] = r.bandwidth_cap_Bps;
    j["size_rows"] = nlohmann::json::array();
    for (const auto& row : r.size_rows)
        j["size_rows"].push_back(
            {{"multiple", row.multiple}, {"bytes", row.bytes}, {"median_wall_s", row.median_wall_s}, {"walls", row.walls}});
    j["core_rows"] = nlohmann::json::array();
    for (const auto& row : r.core_rows)
        j["core_rows"].push_back({{"executors", row.executors},
                                  {"cores", row.cores},
                                  {"median_wall_s", row.median_wall_s},
                                  {"throughput_Bps", row.throughput_Bps},
                                  {"bandwidth_cap_Bps", row.bandwidth_cap_Bps},
                                  {"walls", row.walls}});
    j["readahead_rows"] = nlohmann::json::array();
    for (const auto& row : r.readahead_rows)
        j["readahead_rows"].push_back({{"read_ahead", row.read_ahead},
                                       {"bytes_requested", row.bytes_requested},
                                       {"bytes_fetched", row.bytes_fetched},
                                       {"median_wall_s", row.median_wall_s},
                                       {"walls", row.walls}});
    if (r.breakdown)
        j["breakdown"] = {{"total_s", r.breakdown->total_s},
                          {"cpu_s", r.breakdown->cpu_s},
                          {"read_s", r.breakdown->read_s},
                          {"decompress_s", r.breakdown->decompress_s}};
    if (r.outputs_identical)
        j["outputs_identical"] = *r.outputs_identical;
    return j.dump(2);
}

ExperimentReport report_from_json(std::string_view text)
{
    auto j = nlohmann::json::parse(text);
    ExperimentReport r;
    r.experiment = j.at("experiment").get<std::string>();
    r.complete = j.at("complete").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.r2 = j.at("r2").get<double>();
    r.slope_s_per_byte = j.at("slope_s_per_byte").get<double>();
    r.intercept_s = j.at("intercept_s").get<double>();
    r.single_worker_Bps = j.at("single_worker_Bps").get<double>();
    r.bandwidth_cap_Bps = j.at("bandwidth_cap_Bps").get<std::uint64_t>();
    for (const auto& row : j.at("size_rows"))
        r.size_rows.push_back({row.at("multiple").get<std::size_t>(), row.at("bytes").get<std::uint64_t>(),
                               row.at("median_wall_s").get<double>(), row.at("walls").get<std::vector<double>>()});
    for (const auto& row : j.at("core_rows"))
        r.core_rows.push_back({row.at("executors").get<std::size_t>(), row.at("cores").get<std::size_t>(),
                               row.at("median_wall_s").get<double>(), row.at("throughput_Bps").get<double>(),
                               row.at("bandwidth_cap_Bps").get<std::uint64_t>(),
                               row.at("walls").get<std::vector<double>>()});
    for (const auto& row : j.at("readahead_rows"))
        r.readahead_rows.push_back({row.at("read_ahead").get<std::uint64_t>(),
                                    row.at("bytes_requested").get<std::uint64_t>(),
                                    row.at("bytes_fetched").get<std::uint64_t>(),
                                    row.at("median_wall_s").get<double>(), row.at("walls").get<std::vector<double>>()});
    if (j.contains("breakdown")) {
        const auto& b = j.at("breakdown");
        r.breakdown = Breakdown{b.at("total_s").get<double>(), b.at("cpu_s").get<double>(),
                                b.at("read_s").get<double>(), b.at("decompress_s").get<double>()};
    }
    if (j.contains("outputs_identical"))
        r.outputs_identical = j.at("outputs_identical").get<bool>();
    return r;
}

void write_report(const ExperimentReport& r, const std::filesystem::path& out_dir)
{
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream csv(out_dir / csv_name(r.experiment), std::ios::trunc);
        if (r.experiment == "size")
            write_size_csv(r, csv);
        else if (r.experiment == "cores")
            write_core_csv(r, csv);
        else
            write_readahead_csv(r, csv);
    }
    std::ofstream(out_dir / "summary.md", std::ios::trunc) << render_summary(r);
    std::ofstream(out_dir / "results.json", std::ios::trunc) << to_json(r) << '\n';
}

}  // namespace treeduce::bench

#include "treeduce/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

namespace treeduce::bench {

namespace fs = std::filesystem;

TreeData generate_tree(const GenSpec& spec, std::size_t file_index)
{
    const auto key = file_stream_key(spec.seed, file_index);
    SplitMix64 rng(key);
    const auto n = spec.n_events;
    std::vector<std::int32_t> n_mu(n), charge;
    std::vector<float> pt, eta, phi;
    std::vector<double> met(n);
    std::vector<std::uint64_t> lens(n);
    pt.reserve(2 * n);
    eta.reserve(2 * n);
    phi.reserve(2 * n);
    charge.reserve(2 * n);
    constexpr double pi = std::numbers::pi;
    for (std::uint64_t i = 0; i < n; ++i) {
        int k = poisson_inverse_cdf(rng.uniform(), 2.0);
        n_mu[i] = k;
        lens[i] = static_cast<std::uint64_t>(k);
        for (int m = 0; m < k; ++m) {
            pt.push_back(static_cast<float>(3.0 - 15.0 * std::log1p(-rng.uniform())));
            eta.push_back(static_cast<float>(-2.5 + 5.0 * rng.uniform()));
            phi.push_back(static_cast<float>(-pi + 2.0 * pi * rng.uniform()));
            charge.push_back(rng.uniform() < 0.5 ? -1 : 1);
        }
        met[i] = -30.0 * std::log1p(-rng.uniform());
    }
    TreeData t;
    t.name = "Events";
    t.branches.push_back({"nMuon", ColumnChunk::flat(std::move(n_mu))});
    t.branches.push_back({"Muon_pt", ColumnChunk::jagged_from_lengths(std::move(pt), lens)});
    t.branches.push_back({"Muon_eta", ColumnChunk::jagged_from_lengths(std::move(eta), lens)});
    t.branches.push_back({"Muon_phi", ColumnChunk::jagged_from_lengths(std::move(phi), lens)});
    t.branches.push_back({"Muon_charge", ColumnChunk::jagged_from_lengths(std::move(charge), lens)});
    t.branches.push_back({"MET", ColumnChunk::flat(std::move(met))});

    if (spec.extra_flat_branches > 0) {
        SplitMix64 aux(key ^ 1u);
        std::vector<std::vector<float>> cols(spec.extra_flat_branches, std::vector<float>(n));
        for (std::uint64_t i = 0; i < n; ++i)
            for (auto& c : cols)
                c[i] = static_cast<float>(aux.uniform());
        for (std::size_t k = 0; k < cols.size(); ++k)
            t.branches.push_back({"Aux_" + std::to_string(k), ColumnChunk::flat(std::move(cols[k]))});
    }
    return t;
}

std::vector<std::string> Dataset::paths(std::size_t first_n) const
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(first_n, files.size()); ++i)
        out.push_back((dir / files[i].name).string());
    return out;
}

std::uint64_t Dataset::bytes(std::size_t first_n) const
{
    std::uint64_t b = 0;
    for (std::size_t i = 0; i < std::min(first_n, files.size()); ++i)
        b += files[i].bytes;
    return b;
}

namespace {

std::string file_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "events-%04zu.trf", i);
    return buf;
}

nlohmann::json spec_json(const GenSpec& s)
{
    return {{"generator", "splitmix64-v1"},
            {"seed", s.seed},
            {"n_events", s.n_events},
            {"n_files", s.n_files},
            {"basket_target_entries", s.basket_target_entries},
            {"codec", s.codec == Codec::Deflate ? "deflate" : "none"},
            {"extra_flat_branches", s.extra_flat_branches}};
}

void write_manifest(const Dataset& d)
{
    auto j = spec_json(d.spec);
    j["files"] = nlohmann::json::array();
    for (const auto& f : d.files)
        j["files"].push_back({{"name", f.name}, {"entries", f.entries}, {"bytes", f.bytes}});
    std::ofstream out(d.dir / "dataset.json", std::ios::trunc);
    out << j.dump(2) << '\n';
}

}  // namespace

Dataset generate(const GenSpec& spec, const fs::path& out_dir)
{
    try {
        fs::create_directories(out_dir);
    } catch (const fs::filesystem_error& e) {
        throw engine::JobError("cannot create dataset directory: " + std::string(e.what()));
    }
    Dataset d;
    d.dir = out_dir;
    d.spec = spec;
    WriteOptions opt;
    opt.basket_target_entries = spec.basket_target_entries;
    opt.codec = spec.codec;
    for (std::size_t f = 0; f < spec.n_files; ++f) {
        auto tree = generate_tree(spec, f);
        DatasetFile df{file_name(f), tree.n_entries(), 0};
        {
            FileSink sink(out_dir / df.name);
            write_tree(sink, tree, opt);
            df.bytes = sink.position();
        }
        d.files.push_back(df);
    }
    write_manifest(d);
    return d;
}

std::optional<Dataset> load_dataset(const fs::path& dir)
{
    std::ifstream in(dir / "dataset.json");
    if (!in)
        return std::nullopt;
    try {
        auto j = nlohmann::json::parse(in);
        Dataset d;
        d.dir = dir;
        d.spec.seed = j.at("seed").get<std::uint64_t>();
        d.spec.n_events = j.at("n_events").get<std::uint64_t>();
        d.spec.n_files = j.at("n_files").get<std::size_t>();
        d.spec.basket_target_entries = j.at("basket_target_entries").get<std::uint32_t>();
        d.spec.codec = j.at("codec").get<std::string>() == "deflate" ? Codec::Deflate : Codec::None;
        d.spec.extra_flat_branches = j.at("extra_flat_branches").get<std::size_t>();
        if (j.at("generator").get<std::string>() != "splitmix64-v1")
            return std::nullopt;
        for (const auto& f : j.at("files"))
            d.files.push_back(
                {f.at("name").get<std::string>(), f.at("entries").get<std::uint64_t>(), f.at("bytes").get<std::uint64_t>()});
        return d;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

Dataset ensure_dataset(const GenSpec& spec, const fs::path& dir)
{
    if (auto d = load_dataset(dir)) {
        const auto& s = d->spec;
        bool same = s.seed == spec.seed && s.n_events == spec.n_events && s.n_files >= spec.n_files &&
                    s.basket_target_entries == spec.basket_target_entries && s.codec == spec.codec &&
                    s.extra_flat_branches == spec.extra_flat_branches && d->files.size() == s.n_files;
        for (std::size_t i = 0; same && i < spec.n_files; ++i) {
            std::error_code ec;
            same = fs::file_size(dir / d->files[i].name, ec) == d->files[i].bytes && !ec;
        }
        if (same) {
            d->files.resize(spec.n_files);
            d->spec.n_files = spec.n_files;
            return *d;
        }
    }
    return generate(spec, dir);
}

engine::JobSpec demo_job(std::vector<std::string> inputs, fs::path output, std::uint64_t partition_entries)
{
    engine::JobSpec job;
    job.inputs = std::move(inputs);
    job.tree = "Events";
    job.keep = {"nMuon", "Muon_pt", "Muon_eta", "MET"};
    job.skim = "nMuon >= 2 && max(Muon_pt) > 20";
    job.derived = {{"leading_pt", "max(Muon_pt)"}};
    job.output = std::move(output);
    job.partition_entries = partition_entries;
    return job;
}

std::uint64_t output_digest(const fs::path& output_dir)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    std::vector<char> buf(1 << 16);
    for (const auto& e : engine::read_manifest(output_dir / "manifest.jsonl")) {
        std::ifstream in(output_dir / e.file, std::ios::binary);
        while (in) {
            in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
            for (std::streamsize i = 0; i < in.gcount(); ++i) {
                h ^= static_cast<std::uint8_t>(buf[static_cast<std::size_t>(i)]);
                h *= 0x100000001b3ull;
            }
        }
    }
    return h;
}

}  // namespace treeduce::bench

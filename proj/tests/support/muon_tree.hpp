#pragma once

#include "treeduce/treefile.hpp"

#include <cmath>
#include <random>

namespace treeduce::testing {

/// Small muon-like tree for engine tests: nMuon, Muon_pt, Muon_eta,
/// Muon_charge (jagged), MET, run (i64) and flag (bool).
inline TreeData muon_tree(std::uint64_t seed, std::uint64_t entries)
{
    std::mt19937_64 rng(seed);
    std::poisson_distribution<int> n_mu(2.0);
    std::exponential_distribution<float> pt(1.0f / 15.0f);
    std::uniform_real_distribution<float> eta(-2.5f, 2.5f);
    std::exponential_distribution<double> met(1.0 / 30.0);
    std::vector<std::int32_t> n(entries), charge;
    std::vector<float> pts, etas;
    std::vector<double> mets(entries);
    std::vector<std::int64_t> runs(entries);
    std::vector<std::uint8_t> flags(entries);
    std::vector<std::uint64_t> lens(entries);
    for (std::uint64_t i = 0; i < entries; ++i) {
        n[i] = n_mu(rng);
        lens[i] = static_cast<std::uint64_t>(n[i]);
        for (int k = 0; k < n[i]; ++k) {
            pts.push_back(3.0f + pt(rng));
            etas.push_back(eta(rng));
            charge.push_back(rng() % 2 ? 1 : -1);
        }
        mets[i] = i % 1009 == 5 ? std::nan("") : met(rng);
        runs[i] = static_cast<std::int64_t>(seed * 1000 + i / 100);
        flags[i] = static_cast<std::uint8_t>(rng() % 3 == 0);
    }
    TreeData t;
    t.name = "Events";
    t.branches.push_back({"nMuon", ColumnChunk::flat(n)});
    t.branches.push_back({"Muon_pt", ColumnChunk::jagged_from_lengths(pts, lens)});
    t.branches.push_back({"Muon_eta", ColumnChunk::jagged_from_lengths(etas, lens)});
    t.branches.push_back({"Muon_charge", ColumnChunk::jagged_from_lengths(charge, lens)});
    t.branches.push_back({"MET", ColumnChunk::flat(mets)});
    t.branches.push_back({"run", ColumnChunk::flat(runs)});
    t.branches.push_back({"flag", ColumnChunk::flat(flags)});
    return t;
}

}  // namespace treeduce::testing

#include "treeduce/engine.hpp"

#include <set>

namespace treeduce::engine {

std::vector<std::string> required_columns(const JobSpec& job, const std::vector<std::string>& extra_refs)
{
    std::set<std::string> derived_names;
    for (const auto& d : job.derived)
        derived_names.insert(d.name);

    std::set<std::string> out(job.keep.begin(), job.keep.end());
    auto add_refs = [&](const std::string& text) {
        for (const auto& r : expr::column_refs(*expr::parse(text)))
            out.insert(r);
    };
    if (job.skim)
        add_refs(*job.skim);
    for (const auto& d : job.derived)
        add_refs(d.expr);
    for (const auto& r : extra_refs)
        if (!derived_names.contains(r))
            out.insert(r);
    return {out.begin(), out.end()};
}

namespace {

expr::Schema schema_of(const TreeMeta& meta)
{
    expr::Schema s;
    for (const auto& b : meta.branches)
        s.emplace(b.name, expr::ColumnType{b.dtype, b.shape});
    return s;
}

std::string type_name(const expr::ColumnType& t)
{
    return std::string(to_string(t.dtype)) + "/" + std::string(to_string(t.shape));
}

}  // namespace

Plan plan(const JobSpec& job, const EngineConfig& config, const std::vector<std::string>& extra_refs)
{
    job.validate();
    if (config.executors < 1 || config.cores_per_executor < 1)
        throw JobError("engine: executors and cores per executor must be at least 1");

    Plan p;
    auto required = required_columns(job, extra_refs);
    for (std::size_t i = 0; i < job.inputs.size(); ++i) {
        const auto& input = job.inputs[i];
        TreeMeta meta;
        try {
            auto reader = TreeFileReader::open(open_input(input, config));
            meta = reader.tree(job.tree);
        } catch (const std::exception& e) {
            throw JobError("input " + input + ": " + e.what());
        }
        auto schema = schema_of(meta);
        if (i == 0) {
            p.schema = schema;
            for (const auto& name : required)
                if (!schema.contains(name))
                    throw JobError("input " + input + ": tree '" + job.tree + "' has no branch '" + name + "'");
        } else {
            for (const auto& name : required) {
                auto it = schema.find(name);
                const auto& ref = p.schema.at(name);
                if (it == schema.end())
                    throw JobError("input " + input + ": branch '" + name + "' missing (present in " +
                                   job.inputs.front() + ")");
                if (it->second.dtype != ref.dtype || it->second.shape != ref.shape)
                    throw JobError("input " + input + ": branch '" + name + "' is " + type_name(it->second) +
                                   " but " + type_name(ref) + " in " + job.inputs.front());
            }
        }
        for (std::uint64_t first = 0; first < meta.n_entries; first += job.partition_entries) {
            Task t;
            t.task_id = p.tasks.size();
            t.input_index = i;
            t.input = input;
            t.tree = job.tree;
            t.range = {first, std::min(meta.n_entries, first + job.partition_entries)};
            t.required = required;
            p.tasks.push_back(std::move(t));
        }
    }

    if (!job.inputs.empty()) {
        if (job.skim)
            expr::require_scalar_bool(*expr::parse(*job.skim), p.schema);
        for (const auto& d : job.derived) {
            if (p.schema.contains(d.name))
                throw JobError("derived column '" + d.name + "' shadows an input branch");
            if (expr::typecheck(*expr::parse(d.expr), p.schema).jagged)
                throw JobError("derived column '" + d.name + "' is jagged; derived columns must be per-event scalars");
        }
    }
    return p;
}

}  // namespace treeduce::engine

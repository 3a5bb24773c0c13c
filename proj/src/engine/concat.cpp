#include "treeduce/engine.hpp"

namespace treeduce::engine {

std::uint64_t concat_outputs(const std::vector<std::filesystem::path>& output_dirs,
                             const std::filesystem::path& out_file, const std::string& tree)
{
    TreeData merged;
    merged.name = tree;
    bool first_part = true;
    for (const auto& dir : output_dirs) {
        for (const auto& entry : read_manifest(dir / "manifest.jsonl")) {
            auto reader = TreeFileReader::open(std::make_shared<FileSource>(dir / entry.file));
            const auto& meta = reader.tree(tree);
            if (meta.n_entries != entry.entries)
                throw JobError("part " + entry.file + " has " + std::to_string(meta.n_entries) +
                               " entries but the manifest says " + std::to_string(entry.entries));
            if (first_part) {
                for (const auto& b : meta.branches)
                    merged.branches.push_back({b.name, reader.read_branch(tree, b.name, {0, meta.n_entries})});
                first_part = false;
                continue;
            }
            if (meta.branches.size() != merged.branches.size())
                throw JobError("part " + entry.file + " has a different branch list");
            for (std::size_t i = 0; i < meta.branches.size(); ++i) {
                const auto& b = meta.branches[i];
                auto& target = merged.branches[i];
                if (b.name != target.name || b.dtype != target.column.dtype || b.shape != target.column.shape)
                    throw JobError("part " + entry.file + ": branch '" + b.name + "' does not match earlier parts");
                target.column.append(reader.read_branch(tree, b.name, {0, meta.n_entries}));
            }
        }
    }
    FileSink sink(out_file);
    write_tree(sink, merged);
    return merged.n_entries();
}

}  // namespace treeduce::engine

#include "treeduce/engine.hpp"
#include "treeduce/xrdlite.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace treeduce::engine {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::string unquote(std::string_view s, std::size_t line)
{
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return std::string(s.substr(1, s.size() - 2));
    if (!s.empty() && s.front() == '"')
        throw JobError("job line " + std::to_string(line) + ": unterminated quote");
    return std::string(s);
}

std::vector<std::string> split_list(std::string_view s, std::size_t line)
{
    std::vector<std::string> out;
    if (trim(s).empty())
        return out;
    std::size_t start = 0;
    for (;;) {
        auto comma = s.find(',', start);
        auto item = unquote(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start),
                            line);
        if (item.empty())
            throw JobError("job line " + std::to_string(line) + ": empty list item");
        out.push_back(std::move(item));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

std::string resolve(const std::string& p, const std::filesystem::path& base)
{
    if (xrdl::is_url(p) || base.empty())
        return p;
    std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace

void JobSpec::validate() const
{
    if (tree.empty())
        throw JobError("job: tree name is empty");
    if (keep.empty() && derived.empty())
        throw JobError("job: nothing to write; give keep columns or derived columns");
    if (partition_entries == 0)
        throw JobError("job: partition_entries must be positive");
    std::set<std::string> names;
    for (const auto& k : keep)
        if (!names.insert(k).second)
            throw JobError("job: column '" + k + "' kept twice");
    for (const auto& d : derived) {
        if (d.name.empty())
            throw JobError("job: derived column with empty name");
        if (!names.insert(d.name).second)
            throw JobError("job: derived column '" + d.name + "' clashes with another output column");
    }
}

JobSpec parse_job(std::string_view text, const std::filesystem::path& base_dir)
{
    JobSpec job;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        auto line = trim(text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#')
            continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw JobError("job line " + std::to_string(line_no) + ": expected key = value");
        std::string key(trim(line.substr(0, eq)));
        auto value = line.substr(eq + 1);
        if (!seen.insert(key).second)
            throw JobError("job line " + std::to_string(line_no) + ": duplicate key '" + key + "'");

        if (key == "inputs") {
            for (auto& in : split_list(value, line_no))
                job.inputs.push_back(resolve(in, base_dir));
        } else if (key == "tree") {
            job.tree = unquote(value, line_no);
        } else if (key == "keep") {
            job.keep = split_list(value, line_no);
        } else if (key == "skim") {
            job.skim = unquote(value, line_no);
        } else if (key.starts_with("derive.")) {
            job.derived.push_back({key.substr(7), unquote(value, line_no)});
        } else if (key == "output") {
            job.output = resolve(unquote(value, line_no), base_dir);
        } else if (key == "partition_entries") {
            auto v = unquote(value, line_no);
            std::uint64_t n = 0;
            auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
            if (ec != std::errc{} || ptr != v.data() + v.size() || n == 0)
                throw JobError("job line " + std::to_string(line_no) + ": bad partition_entries '" + v + "'");
            job.partition_entries = n;
        } else {
            throw JobError("job line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    job.validate();
    return job;
}

JobSpec load_job(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw JobError("cannot read job file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_job(ss.str(), file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path());
}

}  // namespace treeduce::engine

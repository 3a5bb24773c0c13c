#include "treeduce/engine.hpp"
#include "treeduce/xrdlite.hpp"

namespace treeduce::engine {

std::shared_ptr<ByteSource> open_input(const std::string& input, const EngineConfig& config)
{
    if (xrdl::is_url(input)) {
        xrdl::ConnectorConfig cc;
        cc.read_ahead = config.read_ahead;
        cc.max_cache_windows = config.max_cache_windows;
        return xrdl::connector_open(xrdl::parse_url(input), cc);
    }
    return std::make_shared<FileSource>(input);
}

}  // namespace treeduce::engine

#pragma once

#include <map>
#include <string>

namespace pixelseq {

// Plain-text run configuration: one `key = value` per line, '#' comments,
// blank lines ignored. Missing files raise ConfigError naming the path.
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

}  // namespace pixelseq

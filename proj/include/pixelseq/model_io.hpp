#pragma once

#include <map>
#include <memory>
#include <string>

#include "pixelseq/network.hpp"

namespace pixelseq {

// NetworkSpec as the checkpoint's key=value header.
std::string network_header(const NetworkSpec& spec, int side);
NetworkSpec spec_from_header(const std::map<std::string, std::string>& kv, int* side_out);

void save_network(const std::string& path, Network& net);
std::unique_ptr<Network> load_network(const std::string& path);

}  // namespace pixelseq

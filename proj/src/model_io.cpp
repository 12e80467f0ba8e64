#include "pixelseq/model_io.hpp"

#include <map>
#include <sstream>

#include "pixelseq/checkpoint.hpp"
#include "pixelseq/errors.hpp"

namespace pixelseq {

std::string network_header(const NetworkSpec& spec, int side) {
  std::ostringstream out;
  out << "format = network\n";
  out << "kind = " << to_string(spec.kind) << '\n';
  out << "depth = " << spec.depth << '\n';
  out << "h = " << spec.h << '\n';
  out << "use_residual = " << (spec.use_residual ? 1 : 0) << '\n';
  out << "use_skip = " << (spec.use_skip ? 1 : 0) << '\n';
  out << "head = " << to_string(spec.head) << '\n';
  out << "head_width = " << spec.head_width << '\n';
  out << "first_kernel = " << spec.first_kernel << '\n';
  out << "lstm_k = " << spec.lstm_k << '\n';
  out << "side = " << side << '\n';
  return out.str();
}

NetworkSpec spec_from_header(const std::map<std::string, std::string>& kv, int* side_out) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("checkpoint header missing key: " + key);
    return it->second;
  };
  NetworkSpec spec;
  spec.kind = net_kind_from_string(get("kind"));
  spec.depth = std::stoi(get("depth"));
  spec.h = std::stoi(get("h"));
  spec.use_residual = std::stoi(get("use_residual")) != 0;
  spec.use_skip = std::stoi(get("use_skip")) != 0;
  spec.head = head_kind_from_string(get("head"));
  spec.head_width = std::stoi(get("head_width"));
  spec.first_kernel = std::stoi(get("first_kernel"));
  spec.lstm_k = std::stoi(get("lstm_k"));
  if (side_out) *side_out = std::stoi(get("side"));
  return spec;
}

void save_network(const std::string& path, Network& net) {
  std::vector<Parameter*> params = net.parameters();
  std::vector<const Parameter*> cps(params.begin(), params.end());
  save_checkpoint(path, network_header(net.spec(), net.side()), cps);
}

std::unique_ptr<Network> load_network(const std::string& path) {
  LoadedCheckpoint ck = read_checkpoint(path);
  int side = 0;
  const NetworkSpec spec = spec_from_header(ck.header, &side);
  auto net = std::make_unique<Network>(spec, side, /*seed=*/0);
  std::vector<Parameter*> params = net->parameters();
  load_parameters(ck, params);
  return net;
}

}  // namespace pixelseq

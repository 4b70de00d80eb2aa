#include <fstream>

#include <json.hpp>

#include "tvae/config.hpp"
#include "tvae/errors.hpp"
#include "tvae/training.hpp"

namespace tvae {

using nlohmann::json;

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  json params = json::object();
  for (const auto& [name, block] : c.params) params[name] = {{"shape", block.shape}, {"values", block.values}};
  json j{{"version", c.version},
         {"config", config_to_json(c.config)},
         {"observed_dim", c.observed_dim},
         {"components", c.components},
         {"params", params},
         {"adam", {{"t", c.adam.t}, {"m", c.adam.m}, {"v", c.adam.v}}},
         {"epoch", c.epoch},
         {"step", c.step},
         {"rng_state", c.rng_state},
         {"warm_labels", c.warm_labels},
         {"order", c.order},
         {"cursor", c.cursor},
         {"epoch_loss_sum", c.epoch_loss_sum},
         {"epoch_predictions", c.epoch_predictions}};
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw FormatError("cannot write checkpoint '" + path.string() + "'");
    out << j.dump() << '\n';
    if (!out) throw FormatError("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  Checkpoint c;
  try {
    const json j = json::parse(in);
    c.version = j.at("version").get<int>();
    if (c.version != kCheckpointVersion) {
      throw FormatError("checkpoint '" + path.string() + "' has version " + std::to_string(c.version) +
                        ", expected " + std::to_string(kCheckpointVersion));
    }
    c.config = config_from_json(j.at("config"));
    c.observed_dim = j.at("observed_dim").get<std::size_t>();
    c.components = j.at("components").get<std::size_t>();
    for (const auto& [name, block] : j.at("params").items()) {
      ParamBlock b{block.at("shape").get<Shape>(), block.at("values").get<std::vector<double>>()};
      if (numel(b.shape) != b.values.size()) throw FormatError("parameter '" + name + "' has a malformed shape");
      c.params.emplace(name, std::move(b));
    }
    const auto& adam = j.at("adam");
    c.adam.t = adam.at("t").get<std::uint64_t>();
    c.adam.m = adam.at("m").get<std::map<std::string, std::vector<double>>>();
    c.adam.v = adam.at("v").get<std::map<std::string, std::vector<double>>>();
    c.epoch = j.at("epoch").get<std::size_t>();
    c.step = j.at("step").get<std::uint64_t>();
    c.rng_state = j.at("rng_state").get<std::string>();
    c.warm_labels = j.at("warm_labels").get<std::vector<int>>();
    c.order = j.at("order").get<std::vector<std::size_t>>();
    c.cursor = j.at("cursor").get<std::size_t>();
    c.epoch_loss_sum = j.at("epoch_loss_sum").get<double>();
    c.epoch_predictions = j.at("epoch_predictions").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw FormatError("corrupt checkpoint '" + path.string() + "': " + e.what());
  }
  c.mixture();  // validates the mixture blocks
  return c;
}

}  // namespace tvae

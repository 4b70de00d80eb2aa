#include "tvae/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "tvae/errors.hpp"

namespace tvae {

using nlohmann::json;

json config_to_json(const TrainConfig& c) {
  return json{{"stepsize", c.stepsize},
              {"sigma_jitter_sq", c.sigma_jitter_sq},
              {"latent_dim", c.latent_dim},
              {"l1_coeff", c.l1_coeff},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"samples", c.samples},
              {"warm_start_iters", c.warm_start_iters},
              {"seed", c.seed},
              {"mode", to_string(c.mode)},
              {"supervised_target", to_string(c.supervised_target)},
              {"supervised_epochs", c.supervised_epochs},
              {"detach_gamma", c.detach_gamma},
              {"baseline", to_string(c.baseline)},
              {"components", c.components},
              {"encoder_hidden", c.encoder_hidden},
              {"decoder_hidden", c.decoder_hidden},
              {"activation", to_string(c.activation)},
              {"log_std_clamp", c.log_std_clamp},
              {"clip_norm", c.clip_norm},
              {"initial_dof", c.initial_dof},
              {"gmm_iters", c.gmm_iters},
              {"pretrain_epochs", c.pretrain_epochs},
              {"pretrain_std", c.pretrain_std}};
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ContractError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ContractError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_unsigned()) throw ContractError("");
    }
    out = it->get<T>();
  } catch (const std::exception&) {
    throw ContractError(std::string("config: key '") + key + "' has the wrong type (got " + it->dump() + ")");
  }
}

std::string read_string(const json& j, const char* key, const std::string& fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw ContractError(std::string("config: key '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

TrainConfig config_from_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ContractError("config: top level must be an object");
  const json known = config_to_json(base);
  std::string unknown;
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ContractError("config: unknown keys: " + unknown);

  TrainConfig c = base;
  read(j, "stepsize", c.stepsize);
  read(j, "sigma_jitter_sq", c.sigma_jitter_sq);
  read(j, "latent_dim", c.latent_dim);
  read(j, "l1_coeff", c.l1_coeff);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "samples", c.samples);
  read(j, "warm_start_iters", c.warm_start_iters);
  read(j, "seed", c.seed);
  c.mode = parse_training_mode(read_string(j, "mode", to_string(c.mode)));
  c.supervised_target = parse_supervised_target(read_string(j, "supervised_target", to_string(c.supervised_target)));
  read(j, "supervised_epochs", c.supervised_epochs);
  read(j, "detach_gamma", c.detach_gamma);
  c.baseline = parse_baseline(read_string(j, "baseline", to_string(c.baseline)));
  read(j, "components", c.components);
  for (const char* key : {"encoder_hidden", "decoder_hidden"}) {
    auto it = j.find(key);
    if (it == j.end()) continue;
    bool ok = it->is_array();
    if (ok)
      for (const auto& v : *it) ok = ok && v.is_number_unsigned();
    if (!ok) throw ContractError(std::string("config: key '") + key + "' must be an array of positive integers");
    (std::string(key) == "encoder_hidden" ? c.encoder_hidden : c.decoder_hidden) = it->get<std::vector<std::size_t>>();
  }
  c.activation = parse_activation(read_string(j, "activation", to_string(c.activation)));
  read(j, "log_std_clamp", c.log_std_clamp);
  read(j, "clip_norm", c.clip_norm);
  read(j, "initial_dof", c.initial_dof);
  read(j, "gmm_iters", c.gmm_iters);
  read(j, "pretrain_epochs", c.pretrain_epochs);
  read(j, "pretrain_std", c.pretrain_std);
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const TrainConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << config_to_json(cfg).dump(2) << '\n';
}

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

}  // namespace tvae

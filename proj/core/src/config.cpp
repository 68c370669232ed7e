#include "pagn/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace pagn {

void RunConfig::validate() const {
  scale.validate();
  weights.validate();
  check(identities_per_split >= 2, "config: identities_per_split must be at least 2");
  check(samples_per_cluster >= 1, "config: samples_per_cluster must be at least 1");
  check(target_cluster >= 1 && target_cluster <= 3, "config: target_cluster must be 1, 2 or 3");
  check(lr0 > 0, "config: lr0 must be positive");
  check(lr_decay_interval > 0, "config: lr_decay_interval must be positive");
  check(lr_decay_factor > 0 && lr_decay_factor <= 1, "config: lr_decay_factor must be in (0,1]");
  check(batch_size >= 1, "config: batch_size must be at least 1");
  check(total_iterations >= 1, "config: total_iterations must be at least 1");
  check(pixel_period >= 1, "config: pixel_period must be at least 1");
  check(weight_decay >= 0, "config: weight_decay must be non-negative");
  check(discriminator == "pyramid" || discriminator == "one_pathway",
        "config: discriminator must be 'pyramid' or 'one_pathway'");
  check(pretrain_age_iterations >= 1 && pretrain_id_iterations >= 1,
        "config: pretrain iteration counts must be at least 1");
  check(triplet_margin > 0, "config: triplet_margin must be positive");
}

namespace {

const std::set<std::string> kKnownKeys = {
    "image_size",        "base_channels",      "channel_multiplier",
    "identity_embedding_dim", "n_age_labels",
    "master_seed",       "seed",               "identities_per_split",
    "samples_per_cluster",
    "target_cluster",    "lambda_a",           "lambda_p",
    "lambda_i",          "lr0",                "lr_decay_interval",
    "lr_decay_factor",   "batch_size",         "total_iterations",
    "pixel_period",      "weight_decay",       "discriminator",
    "pretrain_age_iterations", "pretrain_id_iterations", "triplet_margin"};

}  // namespace

RunConfig config_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  check(!j.is_discarded(), "config: malformed JSON");
  check(j.is_object(), "config: top level must be a JSON object");
  for (const auto& [key, _] : j.items())
    check(kKnownKeys.count(key) != 0, "config: unknown key '" + key + "'");
  RunConfig c;
  try {
    auto get = [&]<typename T>(const char* key, T& field) {
      if (j.contains(key)) field = j.at(key).get<T>();
    };
    get("image_size", c.scale.image_size);
    get("base_channels", c.scale.base_channels);
    get("channel_multiplier", c.scale.channel_multiplier);
    get("identity_embedding_dim", c.scale.identity_embedding_dim);
    get("n_age_labels", c.scale.n_age_labels);
    get("master_seed", c.master_seed);
    get("seed", c.seed);
    get("identities_per_split", c.identities_per_split);
    get("samples_per_cluster", c.samples_per_cluster);
    get("target_cluster", c.target_cluster);
    get("lambda_a", c.weights.lambda_a);
    get("lambda_p", c.weights.lambda_p);
    get("lambda_i", c.weights.lambda_i);
    get("lr0", c.lr0);
    get("lr_decay_interval", c.lr_decay_interval);
    get("lr_decay_factor", c.lr_decay_factor);
    get("batch_size", c.batch_size);
    get("total_iterations", c.total_iterations);
    get("pixel_period", c.pixel_period);
    get("weight_decay", c.weight_decay);
    get("discriminator", c.discriminator);
    get("pretrain_age_iterations", c.pretrain_age_iterations);
    get("pretrain_id_iterations", c.pretrain_id_iterations);
    get("triplet_margin", c.triplet_margin);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json_text(const RunConfig& c) {
  nlohmann::json j;
  j["image_size"] = c.scale.image_size;
  j["base_channels"] = c.scale.base_channels;
  j["channel_multiplier"] = c.scale.channel_multiplier;
  j["identity_embedding_dim"] = c.scale.identity_embedding_dim;
  j["n_age_labels"] = c.scale.n_age_labels;
  j["master_seed"] = c.master_seed;
  j["seed"] = c.seed;
  j["identities_per_split"] = c.identities_per_split;
  j["samples_per_cluster"] = c.samples_per_cluster;
  j["target_cluster"] = c.target_cluster;
  j["lambda_a"] = c.weights.lambda_a;
  j["lambda_p"] = c.weights.lambda_p;
  j["lambda_i"] = c.weights.lambda_i;
  j["lr0"] = c.lr0;
  j["lr_decay_interval"] = c.lr_decay_interval;
  j["lr_decay_factor"] = c.lr_decay_factor;
  j["batch_size"] = c.batch_size;
  j["total_iterations"] = c.total_iterations;
  j["pixel_period"] = c.pixel_period;
  j["weight_decay"] = c.weight_decay;
  j["discriminator"] = c.discriminator;
  j["pretrain_age_iterations"] = c.pretrain_age_iterations;
  j["pretrain_id_iterations"] = c.pretrain_id_iterations;
  j["triplet_margin"] = c.triplet_margin;
  return j.dump(2) + "\n";
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IOError("config: cannot open '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

void echo_config(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream os(dir / "config.json");
  if (!os) throw IOError("config: cannot write '" + (dir / "config.json").string() + "'");
  os << config_to_json_text(cfg);
}

}  // namespace pagn

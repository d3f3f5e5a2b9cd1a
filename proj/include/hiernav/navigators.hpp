#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "hiernav/controllers/dwa.hpp"
#include "hiernav/eval/nav_benchmark.hpp"
#include "hiernav/il/bc.hpp"
#include "hiernav/lowlevel.hpp"
#include "hiernav/rl/train_hrl.hpp"

namespace hiernav {

/// Low-level spec from a short name: "ideal", "mpc", or a gait checkpoint
/// path. The plant mode applies to the plant-backed variants.
inline nlohmann::json low_level_spec(const std::string& name, const PlantMode& mode = {}) {
  if (name == "ideal") return {{"kind", "ideal"}};
  if (name == "mpc") return {{"kind", "mpc"}, {"plant", mode.to_json()}};
  if (!std::filesystem::exists(name))
    throw ConfigError("low level '" + name + "' is neither ideal, mpc nor an existing gait checkpoint");
  auto ck = nn::load_checkpoint(name);
  if (ck.meta.value("kind", "gait") != "gait")
    throw ConfigError(name + " is a '" + ck.meta.value("kind", "") + "' checkpoint, not a gait checkpoint");
  return {{"kind", "learned"}, {"checkpoint", name}, {"checksum", ck.checksum}, {"plant", mode.to_json()}};
}

/// Factory that shares one loaded checkpoint across all instances.
inline eval::LowFactory low_level_factory(const nlohmann::json& spec) {
  if (spec.value("kind", "") != "learned") {
    make_low_level(spec);  // validate now
    return [spec] { return make_low_level(spec); };
  }
  const auto path = spec.at("checkpoint").get<std::string>();
  auto ck = std::make_shared<nn::LoadedCheckpoint>(nn::load_checkpoint(path));
  if (spec.contains("checksum") && spec["checksum"].get<std::string>() != ck->checksum)
    throw ConfigError("gait checkpoint " + path + " does not match the recorded checksum");
  const auto mode = PlantMode::from_json(spec.value("plant", nlohmann::json::object()));
  LearnedGait probe(ck->params, mode, path);
  return [ck, mode, path]() -> std::unique_ptr<LowLevel> { return std::make_unique<LearnedGait>(ck->params, mode, path); };
}

/// Navigator factory from a method name: "dwa", or a navigator checkpoint
/// whose meta kind selects the architecture (bc-rnn, bc-mlp, hrl).
inline eval::NavFactory navigator_factory(const std::string& method, double temperature = 0.0) {
  if (method == "dwa") return [] { return std::make_unique<controllers::DwaNavigator>(); };
  if (!std::filesystem::exists(method))
    throw ConfigError("navigator '" + method + "' is neither dwa nor an existing checkpoint");
  auto ck = std::make_shared<nn::LoadedCheckpoint>(nn::load_checkpoint(method));
  const auto kind = ck->meta.value("kind", "");
  if (kind == "bc-rnn" || kind == "bc-mlp") {
    il::BcNavigator probe(ck->params, ck->meta, temperature);
    return [ck, temperature]() -> std::unique_ptr<NavPolicy> {
      return std::make_unique<il::BcNavigator>(ck->params, ck->meta, temperature);
    };
  }
  if (kind == "hrl") {
    rl::HrlNavigator probe(ck->params);
    return [ck]() -> std::unique_ptr<NavPolicy> { return std::make_unique<rl::HrlNavigator>(ck->params); };
  }
  throw ConfigError(method + " is a '" + kind + "' checkpoint, not a navigator (expected bc-rnn, bc-mlp or hrl)");
}

/// Method label for reports: "dwa" or the checkpoint's kind.
inline std::string navigator_label(const std::string& method) {
  if (method == "dwa") return method;
  return nn::load_checkpoint(method).meta.value("kind", "nav");
}

}  // namespace hiernav

#pragma once

#include <nlohmann/json.hpp>

#include "hsidef/attack.hpp"
#include "hsidef/synth.hpp"
#include "hsidef/train.hpp"

namespace hsidef {

using Json = nlohmann::json;

// Strict parsers: unknown keys are config errors, absent keys keep defaults.
TrainConfig train_config_from_json(const Json& j);
Json train_config_to_json(const TrainConfig& c);

HeadConfig head_config_from_json(const Json& j);
Json head_config_to_json(const HeadConfig& c);

AttackConfig attack_config_from_json(const Json& j);
Json attack_config_to_json(const AttackConfig& c);

SynthSpec synth_spec_from_json(const Json& j);
Json synth_spec_to_json(const SynthSpec& s);

Json load_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

}  // namespace hsidef

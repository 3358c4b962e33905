#include "hsidef/runconfig.hpp"

#include <fstream>
#include <set>

namespace hsidef {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known,
                    const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key))
      throw ConfigError("unknown config key '" + key + "' in section '" + section + "'");
  }
}

template <typename T>
void take(const Json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Rectifier: return "rectifier";
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "rectifier") return Activation::Rectifier;
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

TrainConfig train_config_from_json(const Json& j) {
  reject_unknown(j, {"epochs", "base_lr", "warmup_epochs", "weight_decay", "alpha",
                     "beta", "zeta", "superpixel_fraction", "m", "d", "n",
                     "decoder_channels", "decoder_kernel", "gcn_activation",
                     "decoder_activation", "assoc_weighting", "loss_reduction",
                     "lambda_reg", "sigma", "compactness", "slic_iters", "seed_init",
                     "seed_mask"},
                 "train");
  TrainConfig c;
  take(j, "epochs", c.epochs);
  take(j, "base_lr", c.base_lr);
  take(j, "warmup_epochs", c.warmup_epochs);
  take(j, "weight_decay", c.weight_decay);
  take(j, "alpha", c.alpha);
  take(j, "beta", c.beta);
  take(j, "zeta", c.zeta);
  take(j, "superpixel_fraction", c.superpixel_fraction);
  take(j, "m", c.m);
  take(j, "d", c.d);
  take(j, "n", c.n);
  take(j, "decoder_channels", c.decoder_channels);
  take(j, "decoder_kernel", c.decoder_kernel);
  take(j, "lambda_reg", c.lambda_reg);
  take(j, "sigma", c.sigma);
  take(j, "compactness", c.compactness);
  take(j, "slic_iters", c.slic_iters);
  take(j, "seed_init", c.seed_init);
  take(j, "seed_mask", c.seed_mask);
  if (j.contains("gcn_activation"))
    c.gcn_activation = parse_activation(j.at("gcn_activation").get<std::string>());
  if (j.contains("decoder_activation"))
    c.decoder_activation = parse_activation(j.at("decoder_activation").get<std::string>());
  if (j.contains("assoc_weighting")) {
    const auto name = j.at("assoc_weighting").get<std::string>();
    if (name == "paper") c.assoc_weighting = AssocWeighting::Paper;
    else if (name == "inverse") c.assoc_weighting = AssocWeighting::Inverse;
    else throw ConfigError("unknown assoc_weighting '" + name + "'");
  }
  if (j.contains("loss_reduction")) {
    const auto name = j.at("loss_reduction").get<std::string>();
    if (name == "mean") c.loss_reduction = LossReduction::Mean;
    else if (name == "sum") c.loss_reduction = LossReduction::Sum;
    else throw ConfigError("unknown loss_reduction '" + name + "'");
  }
  c.validate();
  return c;
}

Json train_config_to_json(const TrainConfig& c) {
  return Json{
      {"epochs", c.epochs},
      {"base_lr", c.base_lr},
      {"warmup_epochs", c.warmup_epochs},
      {"weight_decay", c.weight_decay},
      {"alpha", c.alpha},
      {"beta", c.beta},
      {"zeta", c.zeta},
      {"superpixel_fraction", c.superpixel_fraction},
      {"m", c.m},
      {"d", c.d},
      {"n", c.n},
      {"decoder_channels", c.decoder_channels},
      {"decoder_kernel", c.decoder_kernel},
      {"gcn_activation", activation_name(c.gcn_activation)},
      {"decoder_activation", activation_name(c.decoder_activation)},
      {"assoc_weighting",
       c.assoc_weighting == AssocWeighting::Paper ? "paper" : "inverse"},
      {"loss_reduction", c.loss_reduction == LossReduction::Mean ? "mean" : "sum"},
      {"lambda_reg", c.lambda_reg},
      {"sigma", c.sigma},
      {"compactness", c.compactness},
      {"slic_iters", c.slic_iters},
      {"seed_init", c.seed_init},
      {"seed_mask", c.seed_mask},
  };
}

HeadConfig head_config_from_json(const Json& j) {
  reject_unknown(j, {"epochs", "lr", "weight_decay", "hidden", "seed", "mask_seed"},
                 "head");
  HeadConfig c;
  take(j, "epochs", c.epochs);
  take(j, "lr", c.lr);
  take(j, "weight_decay", c.weight_decay);
  take(j, "hidden", c.hidden);
  take(j, "seed", c.seed);
  take(j, "mask_seed", c.mask_seed);
  if (c.hidden.size() != 3) throw ConfigError("head: hidden must list 3 widths");
  if (c.epochs < 0 || c.lr <= 0.0) throw ConfigError("head: bad epochs or lr");
  return c;
}

Json head_config_to_json(const HeadConfig& c) {
  return Json{{"epochs", c.epochs},   {"lr", c.lr},
              {"weight_decay", c.weight_decay}, {"hidden", c.hidden},
              {"seed", c.seed},       {"mask_seed", c.mask_seed}};
}

AttackConfig attack_config_from_json(const Json& j) {
  reject_unknown(
      j, {"method", "epsilon", "step", "iters", "norm", "overshoot", "eot_samples"},
      "attack");
  AttackConfig c;
  if (j.contains("method")) c = AttackConfig::defaults(
      parse_attack_method(j.at("method").get<std::string>()));
  take(j, "epsilon", c.epsilon);
  take(j, "step", c.step);
  take(j, "iters", c.iters);
  take(j, "overshoot", c.overshoot);
  take(j, "eot_samples", c.eot_samples);
  if (j.contains("norm")) {
    const auto name = j.at("norm").get<std::string>();
    if (name == "l2") c.norm = AttackNorm::L2;
    else if (name == "linf") c.norm = AttackNorm::Linf;
    else throw ConfigError("unknown norm '" + name + "'");
  }
  c.validate();
  return c;
}

Json attack_config_to_json(const AttackConfig& c) {
  return Json{{"method", attack_method_name(c.method)},
              {"epsilon", c.epsilon},
              {"step", c.step},
              {"iters", c.iters},
              {"norm", c.norm == AttackNorm::L2 ? "l2" : "linf"},
              {"overshoot", c.overshoot},
              {"eot_samples", c.eot_samples}};
}

SynthSpec synth_spec_from_json(const Json& j) {
  reject_unknown(j, {"height", "width", "bands", "classes", "blob_count",
                     "noise_sigma", "seed"},
                 "synth");
  SynthSpec s;
  take(j, "height", s.height);
  take(j, "width", s.width);
  take(j, "bands", s.bands);
  take(j, "classes", s.classes);
  take(j, "blob_count", s.blob_count);
  take(j, "noise_sigma", s.noise_sigma);
  take(j, "seed", s.seed);
  s.validate();
  return s;
}

Json synth_spec_to_json(const SynthSpec& s) {
  return Json{{"height", s.height},         {"width", s.width},
              {"bands", s.bands},           {"classes", s.classes},
              {"blob_count", s.blob_count}, {"noise_sigma", s.noise_sigma},
              {"seed", s.seed}};
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("malformed json in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace hsidef

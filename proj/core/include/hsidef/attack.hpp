#pragma once

#include <string>
#include <vector>

#include "hsidef/classifier.hpp"
#include "hsidef/cube.hpp"

namespace hsidef {

enum class AttackMethod { Fgsm, Bim, Deepfool };
enum class AttackNorm { L2, Linf };

std::string attack_method_name(AttackMethod m);
AttackMethod parse_attack_method(const std::string& name);

struct AttackConfig {
  AttackMethod method = AttackMethod::Fgsm;
  double epsilon = 16.0 / 255.0;
  double step = 8.0 / 255.0;
  int iters = 20;
  AttackNorm norm = AttackNorm::L2;
  double overshoot = 0.02;
  int eot_samples = 1;

  void validate() const;
  static AttackConfig defaults(AttackMethod method);
};

struct AttackReport {
  std::string method;
  double max_abs_delta = 0.0;     // max |delta| over every element
  double max_pixel_l2 = 0.0;      // max over pixels of the spectrum l2 delta
  double flip_rate = 0.0;         // attacked pixels whose prediction changed
  int attacked = 0;
  int skipped = 0;                // deepfool pixels with gradient ties
  std::vector<double> step_losses;  // bim: CE after each iteration
};

// Untargeted attacks over every labeled pixel of `labels`; loss is the
// summed cross-entropy of the labeled pixels. Perturbed cubes stay in [0,1].
HsiCube fgsm(PixelClassifier& model, const HsiCube& cube, const LabelMap& labels,
             const AttackConfig& config, AttackReport* report = nullptr);
HsiCube bim(PixelClassifier& model, const HsiCube& cube, const LabelMap& labels,
            const AttackConfig& config, AttackReport* report = nullptr);
HsiCube deepfool(PixelClassifier& model, const HsiCube& cube, const LabelMap& labels,
                 const AttackConfig& config, AttackReport* report = nullptr);

HsiCube run_attack(PixelClassifier& model, const HsiCube& cube, const LabelMap& labels,
                   const AttackConfig& config, AttackReport* report = nullptr);

}  // namespace hsidef

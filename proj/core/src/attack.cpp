#include "hsidef/attack.hpp"

#include <algorithm>
#include <cmath>

namespace hsidef {

std::string attack_method_name(AttackMethod m) {
  switch (m) {
    case AttackMethod::Fgsm: return "fgsm";
    case AttackMethod::Bim: return "bim";
    case AttackMethod::Deepfool: return "deepfool";
  }
  return "?";
}

AttackMethod parse_attack_method(const std::string& name) {
  if (name == "fgsm") return AttackMethod::Fgsm;
  if (name == "bim") return AttackMethod::Bim;
  if (name == "deepfool") return AttackMethod::Deepfool;
  throw ConfigError("unknown attack method '" + name + "'");
}

void AttackConfig::validate() const {
  if (epsilon <= 0.0) throw ConfigError("attack: epsilon must be positive");
  if (iters < 1) throw ConfigError("attack: iters must be >= 1");
  if (overshoot < 0.0) throw ConfigError("attack: overshoot must be >= 0");
  if (eot_samples < 1) throw ConfigError("attack: eot_samples must be >= 1");
  if (method == AttackMethod::Bim && step <= 0.0)
    throw ConfigError("attack: bim step must be positive");
}

AttackConfig AttackConfig::defaults(AttackMethod method) {
  AttackConfig c;
  c.method = method;
  switch (method) {
    case AttackMethod::Fgsm:
      c.norm = AttackNorm::L2;
      c.iters = 1;
      break;
    case AttackMethod::Bim:
      c.norm = AttackNorm::Linf;
      c.iters = 20;
      break;
    case AttackMethod::Deepfool:
      c.norm = AttackNorm::Linf;
      c.iters = 40;
      break;
  }
  return c;
}

namespace {

std::vector<int> attacked_labels(const LabelMap& labels) {
  return labels.labels;  // 0 entries are ignored by cross_entropy
}

// Averaged loss-ascent gradient over eot_samples mask draws.
Matrix ce_input_gradient(PixelClassifier& model, const HsiCube& cube,
                         const std::vector<int>& labels, int eot_samples) {
  Matrix total;
  for (int s = 0; s < eot_samples; ++s) {
    const Matrix scores = model.scores(cube);
    Matrix dscores;
    cross_entropy(scores, labels, &dscores);
    const Matrix g = model.input_gradient(cube, dscores);
    if (total.size() == 0) total = g;
    else total += g;
  }
  return total / static_cast<double>(eot_samples);
}

void fill_norms(const HsiCube& clean, const HsiCube& adv, AttackReport* report) {
  if (!report) return;
  const Matrix delta = adv.values - clean.values;
  report->max_abs_delta = delta.cwiseAbs().maxCoeff();
  report->max_pixel_l2 = delta.rowwise().norm().maxCoeff();
}

void fill_flip_rate(PixelClassifier& model, const HsiCube& clean, const HsiCube& adv,
                    const LabelMap& labels, AttackReport* report) {
  if (!report) return;
  const auto before = predict_labels(model.scores(clean));
  const auto after = predict_labels(model.scores(adv));
  int attacked = 0, flipped = 0;
  for (int p = 0; p < labels.pixels(); ++p) {
    if (labels.labels[static_cast<std::size_t>(p)] == 0) continue;
    ++attacked;
    if (before[static_cast<std::size_t>(p)] != after[static_cast<std::size_t>(p)])
      ++flipped;
  }
  report->attacked = attacked;
  report->flip_rate = attacked > 0 ? static_cast<double>(flipped) / attacked : 0.0;
}

}  // namespace

HsiCube fgsm(PixelClassifier& model, const HsiCube& cube, const LabelMap& labels,
             const AttackConfig& config, AttackReport* report) {
  config.validate();
  const auto y = attacked_labels(labels);
  const Matrix g = ce_input_gradient(model, cube, y, config.eot_samples);

  HsiCube adv = cube;
  if (g.cwiseAbs().maxCoeff() == 0.0) {
    warn("fgsm: zero gradient, returning the input unchanged");
  } else if (config.norm == AttackNorm::L2) {
    // Per-pixel normalization: every attacked spectrum moves by an
    // epsilon-length l2 step along its own gradient.
    int zero_rows = 0;
    for (Index p = 0; p < adv.values.rows(); ++p) {
      const double nrm = g.row(p).norm();
      if (nrm < 1e-300) {
        ++zero_rows;
        continue;
      }
      adv.values.row(p) += (config.epsilon / nrm) * g.row(p);
    }
    if (zero_rows > 0)
      warn("fgsm: " + std::to_string(zero_rows) + " pixel(s) with zero gradient left unchanged");
  } else {
    adv.values += config.epsilon * g.unaryExpr([](double x) {
      return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    });
  }
  adv.values = adv.values.cwiseMax(0.0).cwiseMin(1.0);

  if (report) {
    report->method = "fgsm";
    fill_norms(cube, adv, report);
    fill_flip_rate(model, cube, adv, labels, report);
  }
  return adv;
}

HsiCube bim(PixelClassifier& model, const HsiCube& cube, const LabelMap& labels,
            const AttackConfig& config, AttackReport* report) {
  config.validate();
  const auto y = attacked_labels(labels);

  HsiCube adv = cube;
  for (int k = 0; k < config.iters; ++k) {
    const Matrix g = ce_input_gradient(model, adv, y, config.eot_samples);
    if (g.cwiseAbs().maxCoeff() == 0.0) {
      warn("bim: zero gradient at iteration " + std::to_string(k));
      break;
    }
    adv.values += config.step * g.unaryExpr([](double x) {
      return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    });
    // Project back onto the epsilon ball of the clean cube, then the box.
    adv.values = adv.values.cwiseMin((cube.values.array() + config.epsilon).matrix())
                     .cwiseMax((cube.values.array() - config.epsilon).matrix());
    adv.values = adv.values.cwiseMax(0.0).cwiseMin(1.0);

    if (report) {
      const Matrix scores = model.scores(adv);
      report->step_losses.push_back(cross_entropy(scores, y, nullptr));
    }
  }

  if (report) {
    report->method = "bim";
    fill_norms(cube, adv, report);
    fill_flip_rate(model, cube, adv, labels, report);
  }
  return adv;
}

HsiCube deepfool(PixelClassifier& model, const HsiCube& cube, const LabelMap& labels,
                 const AttackConfig& config, AttackReport* report) {
  config.validate();
  if (model.classes() < 2) throw DataError("deepfool: need at least 2 classes");

  const auto local = model.local_view(cube);
  HsiCube adv = cube;
  int skipped = 0;

  for (int p = 0; p < labels.pixels(); ++p) {
    const int y = labels.labels[static_cast<std::size_t>(p)];
    if (y == 0) continue;

    const Vector x0 = cube.values.row(p).transpose();
    Vector accum = Vector::Zero(x0.size());

    // Already-misclassified pixels stay untouched (zero iterations).
    {
      const Vector s = local->scores(p, x0);
      Index pred;
      s.maxCoeff(&pred);
      if (static_cast<int>(pred) + 1 != y) continue;
    }

    bool ties = false;
    for (int it = 0; it < config.iters; ++it) {
      const Vector x_cur = x0 + accum;
      const Vector s = local->scores(p, x_cur);
      const Matrix jac = local->jacobian(p, x_cur);  // K x bands

      // Nearest boundary under the linf-dual rule: direction sign(w),
      // magnitude |f| / ||w||_1.
      double best_ratio = 0.0;
      int best_k = -1;
      for (int k = 0; k < model.classes(); ++k) {
        if (k + 1 == y) continue;
        const Eigen::RowVectorXd w = jac.row(k) - jac.row(y - 1);
        const double w_l1 = w.cwiseAbs().sum();
        if (w_l1 < 1e-12) continue;
        const double ratio = std::abs(s[k] - s[y - 1]) / w_l1;
        if (best_k == -1 || ratio < best_ratio) {
          best_ratio = ratio;
          best_k = k;
        }
      }
      if (best_k == -1) {
        ties = true;
        break;
      }

      const Eigen::RowVectorXd w = jac.row(best_k) - jac.row(y - 1);
      accum += best_ratio * w.transpose().unaryExpr([](double x) {
        return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      });

      // Flip check at the overshoot-scaled point.
      const Vector probe = x0 + (1.0 + config.overshoot) * accum;
      const Vector s_probe = local->scores(p, probe);
      Index pred;
      s_probe.maxCoeff(&pred);
      if (static_cast<int>(pred) + 1 != y) break;
    }
    if (ties) {
      ++skipped;
      continue;
    }

    const Vector x_adv = (x0 + (1.0 + config.overshoot) * accum)
                             .cwiseMax(0.0)
                             .cwiseMin(1.0);
    adv.values.row(p) = x_adv.transpose();
  }

  if (report) {
    report->method = "deepfool";
    report->skipped = skipped;
    fill_norms(cube, adv, report);
    fill_flip_rate(model, cube, adv, labels, report);
  }
  return adv;
}

HsiCube run_attack(PixelClassifier& model, const HsiCube& cube, const LabelMap& labels,
                   const AttackConfig& config, AttackReport* report) {
  switch (config.method) {
    case AttackMethod::Fgsm: return fgsm(model, cube, labels, config, report);
    case AttackMethod::Bim: return bim(model, cube, labels, config, report);
    case AttackMethod::Deepfool: return deepfool(model, cube, labels, config, report);
  }
  throw ConfigError("run_attack: unknown method");
}

}  // namespace hsidef

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdeloop {

/// Which stability condition a certificate evaluates. The wire identifiers
/// returned by `to_string` are part of the report format.
enum class ConditionId {
  LoopACoupling,        // |r a| < K + pi^2
  KelvinVoigt,          // 2c^2 < 2 mu sigma + sigma^2 pi^2
  PositiveSpectrum,     // p (pi - 2 b_1)^2 > 4a
  LoopBSmallGain,       // weighted kernel gain < p omega^2 - a
  DiffusionRobustness,  // 2p sqrt(|k| max int|l|) < v
  WeightAssumption,     // differential + boundary inequalities on eta
  LoopAGainProduct,     // L < 1
};

inline std::string to_string(ConditionId id) {
  switch (id) {
    case ConditionId::LoopACoupling: return "A-2.7";
    case ConditionId::KelvinVoigt: return "KV-2.11";
    case ConditionId::PositiveSpectrum: return "B-2.19";
    case ConditionId::LoopBSmallGain: return "B-2.21";
    case ConditionId::DiffusionRobustness: return "EX-2.28";
    case ConditionId::WeightAssumption: return "H4";
    case ConditionId::LoopAGainProduct: return "SG-L";
  }
  return "";
}

inline ConditionId condition_from_string(const std::string& s) {
  for (auto id : {ConditionId::LoopACoupling, ConditionId::KelvinVoigt, ConditionId::PositiveSpectrum,
                  ConditionId::LoopBSmallGain, ConditionId::DiffusionRobustness,
                  ConditionId::WeightAssumption, ConditionId::LoopAGainProduct})
    if (to_string(id) == s) return id;
  throw std::invalid_argument("unknown condition id '" + s + "'");
}

struct Witness {
  std::optional<double> theta;
  std::optional<double> omega;
  std::optional<double> epsilon;
  std::optional<double> zeta;

  bool empty() const { return !theta && !omega && !epsilon && !zeta; }
};

/// An evaluated strict inequality lhs < rhs.
struct Certificate {
  ConditionId condition = ConditionId::LoopACoupling;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  Witness witness;
  bool pass = false;
  std::vector<std::string> notes;

  static Certificate strict(ConditionId id, double lhs, double rhs) {
    Certificate c;
    c.condition = id;
    c.lhs = lhs;
    c.rhs = rhs;
    c.margin = rhs - lhs;
    c.pass = c.margin > 0.0;
    return c;
  }
};

}  // namespace pdeloop

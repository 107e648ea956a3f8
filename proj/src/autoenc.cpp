#include "liteatt/autoenc.hpp"

namespace liteatt {

std::string_view to_string(Arch arch) {
  switch (arch) {
    case Arch::M1: return "M1";
    case Arch::M2: return "M2";
    case Arch::M3: return "M3";
  }
  return "?";
}

Arch parse_arch(std::string_view s) {
  if (s == "M1" || s == "m1") return Arch::M1;
  if (s == "M2" || s == "m2") return Arch::M2;
  if (s == "M3" || s == "m3") return Arch::M3;
  throw std::invalid_argument("unknown architecture '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw std::invalid_argument("train config: epochs and batch size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && epsilon > 0.0))
    throw std::invalid_argument("train config: Adam constants out of range");
}

}  // namespace liteatt

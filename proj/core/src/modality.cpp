#include "omnic/modality.hpp"

#include "omnic/errors.hpp"

namespace omnic {

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kImage:
      return "image";
    case Modality::kAudio:
      return "audio";
    case Modality::kText:
      return "text";
  }
  throw ContractError("unknown modality tag");
}

Modality parse_modality(std::string_view name) {
  if (name == "image" || name == "I") return Modality::kImage;
  if (name == "audio" || name == "A") return Modality::kAudio;
  if (name == "text" || name == "T") return Modality::kText;
  throw ContractError("unknown modality '" + std::string(name) + "'");
}

Modality batch_modality(std::span<const ModalitySample> batch) {
  if (batch.empty()) throw ContractError("empty batch");
  const Modality first = batch.front().modality();
  for (const ModalitySample& s : batch) {
    if (s.modality() != first) {
      throw ContractError(std::string("mixed-modality batch: ") + modality_name(first) + " and " +
                          modality_name(s.modality()));
    }
  }
  return first;
}

}  // namespace omnic

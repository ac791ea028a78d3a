#include "ssg/training.hpp"

namespace ssg {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("[models] learning rate must be positive");
  }
  if (batch_size == 0) throw ValidationError("[models] batch size must be positive");
  if (epochs == 0) throw ValidationError("[models] epoch count must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw ValidationError("[models] hidden sizes must be positive");
  }
  if (embedding == 0 || encoder_hidden == 0 || decoder_hidden == 0) {
    throw ValidationError("[models] sequence model sizes must be positive");
  }
}

}  // namespace ssg

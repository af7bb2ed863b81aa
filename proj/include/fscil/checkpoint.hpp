#pragma once

#include <string>

#include "fscil/protocol.hpp"

namespace fscil {

// Textual checkpoint of a trained state. Parameters are rendered as hex
// floats (%a), so save followed by load reproduces every double bit for bit.
std::string serialize_state(const TrainedState& state);
TrainedState deserialize_state(const std::string& text);

void save_checkpoint(const std::string& path, const TrainedState& state);
TrainedState load_checkpoint(const std::string& path);

}  // namespace fscil

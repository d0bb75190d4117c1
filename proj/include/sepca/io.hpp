#pragma once

#include <string>

#include "sepca/sepca.hpp"
#include "sepca/synth.hpp"
#include "sepca/transform.hpp"

namespace sepca {

// JSON header at `path`, raw little-endian f64 pixels in `path + ".bin"`.
void write_stack(const std::string& path, const ImageStack& stack);
ImageStack read_stack(const std::string& path);

// Single-file container: magic line, u64 header length, JSON index, binary payload.
void write_model(const std::string& path, const SepcaModel& model);
SepcaModel read_model(const std::string& path);

void write_truth(const std::string& path, const GroundTruthModel& model);
GroundTruthModel read_truth(const std::string& path);

}  // namespace sepca

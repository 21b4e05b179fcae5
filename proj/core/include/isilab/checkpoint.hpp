#pragma once

#include <filesystem>

#include "isilab/nn.hpp"

namespace isilab {

// A checkpoint is a directory holding manifest.json (tensor names and shapes,
// dtype, encoder config echo) plus one raw little-endian float32 file per
// tensor, named after the parameter. Loading rebuilds the model from the
// encoder echo, inferring head presence from the stored tensor names, and
// demands an exact match between stored and expected names and shapes.
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

}  // namespace isilab

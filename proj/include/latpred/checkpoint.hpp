#pragma once

// Self-describing weight files: a manifest of named entries followed by
// little-endian blobs. Weights are stored as f32 or, optionally, f16.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "latpred/model.hpp"

namespace latpred {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BlobDtype : std::uint8_t { F32 = 0, F16 = 1, F64 = 2, Text = 3 };

std::uint16_t float_to_half(float f);
float half_to_float(std::uint16_t h);

void save_checkpoint(const ModelParameters<float>& params, std::ostream& out,
                     BlobDtype weight_dtype = BlobDtype::F32);
ModelParameters<float> load_checkpoint(std::istream& in);

void save_checkpoint_file(const ModelParameters<float>& params, const std::string& path,
                          BlobDtype weight_dtype = BlobDtype::F32);
ModelParameters<float> load_checkpoint_file(const std::string& path);

}  // namespace latpred

#pragma once

// Synthetic blob dataset generation, on-disk dataset loading, checkpoint
// serialization, and weight-mask image export.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "litenext/model.hpp"

namespace litenext {

struct SampleRecord {
  std::string id;
  int height = 0, width = 0;
  std::vector<float> image;  // CHW, 3 channels, [0,1]
  std::vector<float> mask;   // HW, values in {0,1}
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointCrcError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointFormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

// n images of 2-6 soft-edged elliptical blobs on a textured noisy
// background; masks are the exact generator geometry. overlap_fraction of
// the images contain touching/overlapping blobs. Writes images/<id>.png
// and masks/<id>.png under out_dir.
void synth_generate(int n, int size, double overlap_fraction, uint64_t seed,
                    const std::string& out_dir);

// Loads images/*.png + masks/*.png with matching stems, resizing to
// target_size (bilinear images, nearest + threshold-127 masks).
std::vector<SampleRecord> load_dataset(const std::string& dir,
                                       int target_size);

void save_checkpoint(const ModelParams<float>& params,
                     const std::string& path);
ModelParams<float> load_checkpoint(const std::string& path);

// 8-bit grayscale PNG with level floor(255 * w) per pixel.
void export_weight_mask_image(const Tensor<float>& weight_mask,
                              const std::string& path);

}  // namespace litenext

// Image IO and dataset handling. Images are [1,C,H,W] tensors with values
// in [0,1]; files are 8-bit PNG or binary PPM. Degradations are synthesized
// deterministically from a seeded RNG.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enrest/rng.hpp"
#include "enrest/tensor.hpp"

namespace enrest {

// format picked by file content (PNG signature or P6 header)
Tensor load_image(const std::string& path, DType dt = DType::F32);
// format picked by extension: .png or .ppm
void save_image(const std::string& path, const Tensor& img);

Tensor decode_png(const std::vector<unsigned char>& bytes, DType dt = DType::F32);
std::vector<unsigned char> encode_png(const Tensor& img);
Tensor decode_ppm(const std::vector<unsigned char>& bytes, DType dt = DType::F32);
std::vector<unsigned char> encode_ppm(const Tensor& img);

// additive white noise with sigma on the 0..255 scale, clipped to [0,1]
Tensor add_gaussian_noise(const Tensor& img, double sigma255, Rng& rng);

struct PatchRect {
  std::int64_t y = 0;
  std::int64_t x = 0;
  std::int64_t size = 0;
};

// One rect drawn per sample and applied to input and target alike, so the
// two crops always cover the same pixels.
PatchRect draw_patch_rect(std::int64_t h, std::int64_t w, std::int64_t size, Rng& rng);
// symmetric (edge-inclusive) reflection for windows beyond the border
Tensor crop_patch(const Tensor& img, const PatchRect& r);

Tensor flip_h(const Tensor& img);
Tensor flip_v(const Tensor& img);

// stacks the two photosite views on the channel axis, left first
Tensor dual_pixel_concat(const Tensor& left, const Tensor& right);

// pads bottom/right by symmetric reflection up to the next multiple
Tensor pad_to_multiple(const Tensor& img, int multiple);
// top-left window
Tensor crop_to(const Tensor& img, std::int64_t h, std::int64_t w);

enum class Task { Denoise, DeblurDp, Sr, Enhance };
const char* task_name(Task t);
Task parse_task(const std::string& s);

struct SynthSpec {
  Task task = Task::Denoise;
  double noise_sigma = 25.0;  // 0..255 scale
  int sr_factor = 2;          // 2 or 4
};

// clean image -> degraded network input (6 channels for the paired-view
// deblur task, 3 otherwise); the target stays the clean image
Tensor synth_degrade(const Tensor& clean, const SynthSpec& spec, Rng& rng);

struct ImagePair {
  Tensor input;
  Tensor target;
  std::string stem;
};

struct Dataset {
  std::vector<ImagePair> pairs;
};

struct DatasetSpec {
  std::string target_dir;
  std::string input_dir;  // empty: synthesize inputs from the targets
  SynthSpec synth;
  DType dt = DType::F32;
};

Dataset load_dataset(const DatasetSpec& spec, Rng& rng);

// procedural test images: smooth shaded background plus random rectangles
// and disks, deterministic in the seed
Tensor synth_clean_image(std::int64_t h, std::int64_t w, std::uint64_t seed, DType dt = DType::F32);

}  // namespace enrest

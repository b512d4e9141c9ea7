#pragma once

#include "twmx/weights.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace twmx {

// Weight container, all integers little-endian:
//   "TWMX" | u32 version | u32 count |
//   count x ( u32 name_len | name bytes | u32 rank | rank x u32 dim | f32 payload )
// Conv weights are written with rank 4, vector parameters with rank 1.
inline constexpr char kWeightMagic[4] = {'T', 'W', 'M', 'X'};
inline constexpr uint32_t kWeightVersion = 1;

std::vector<uint8_t> encode_weight_file(const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> decode_weight_file(const std::vector<uint8_t>& bytes);

std::map<std::string, Tensor> read_weight_file(const std::string& path);
void write_weight_file(const std::string& path, const std::map<std::string, Tensor>& tensors);

void save_weights(const WeightStore& store, const std::string& path);
/// Reads and validates against the declared layers (orphans, missing entries and shapes).
WeightStore load_weights(const std::string& path, const std::vector<LayerDecl>& layers);

/// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::string& path, const std::string& contents);
std::vector<uint8_t> read_file_bytes(const std::string& path);

/// Binary PPM (P6) or PNG, detected from the file signature. Returns
/// (1, 3, h, w) with values v / 255.
Tensor load_image(const std::string& path);
Tensor decode_ppm(const std::vector<uint8_t>& bytes);

/// Binary PGM (P5) mask: label 0 -> 0, label 1 -> 255. Input (1, 1, h, w).
std::string encode_pgm_mask(const Tensor& mask);
/// Reads a P5 mask; 0 -> label 0, 255 -> label 1, anything else is a decode error.
Tensor load_pgm_mask(const std::string& path);
Tensor decode_pgm_mask(const std::vector<uint8_t>& bytes);

/// P6 overlay: image (1, 3, h, w) in [0, 1], drivable area tinted green, lanes red.
std::string encode_overlay_ppm(const Tensor& image, const Tensor& drivable_mask, const Tensor& lane_mask);
std::string encode_ppm(const Tensor& image);

} // namespace twmx

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/nn/tensor.hpp"

namespace tempo::nn {

inline constexpr int kModelFormatVersion = 1;

/// Parsed model file: the JSON header and raw parameter blocks.
struct ModelFile {
  nlohmann::json header;
  std::vector<Matrix> blocks;
};

/// Hash of an architecture descriptor (FNV-1a over its compact JSON dump).
std::string descriptor_hash(const nlohmann::json& descriptor);

/// Layout:
///   8 bytes   magic "TEMPOMDL"
///   u64 LE    header length N
///   N bytes   UTF-8 JSON header {format_version, descriptor, descriptor_hash, parameters, ...}
///   u64 LE    block count
///   per block u64 LE rows, u64 LE cols, rows*cols f64 LE in row-major order
/// `header` supplies extra fields (seed, training config, buffers).
void write_model(std::ostream& out, const nlohmann::json& descriptor, nlohmann::json header,
                 const ParameterSet& params);

/// Reads and validates magic, version and descriptor hash (FormatError).
ModelFile read_model(std::istream& in);

/// Copies blocks into params after checking count, names and shapes.
void load_parameters(ParameterSet& params, const ModelFile& file);

void save_model_file(const std::string& path, const nlohmann::json& descriptor,
                     nlohmann::json header, const ParameterSet& params);
ModelFile load_model_file(const std::string& path);

}  // namespace tempo::nn

#include "tempo/nn/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "tempo/core/error.hpp"
#include "tempo/core/io.hpp"

namespace tempo::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'T', 'E', 'M', 'P', 'O', 'M', 'D', 'L'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!in) throw Error(Errc::FormatError, "truncated model file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

std::string descriptor_hash(const nlohmann::json& descriptor) {
  return hex64(fnv1a(descriptor.dump()));
}

void write_model(std::ostream& out, const nlohmann::json& descriptor, nlohmann::json header,
                 const ParameterSet& params) {
  header["format_version"] = kModelFormatVersion;
  header["descriptor"] = descriptor;
  header["descriptor_hash"] = descriptor_hash(descriptor);
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& p : params) {
    layout.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  header["parameters"] = layout;
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_u64(out, params.size());
  for (const auto& p : params) {
    put_u64(out, static_cast<std::uint64_t>(p.value.rows()));
    put_u64(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Index i = 0; i < p.value.size(); ++i) put_f64(out, p.value.data()[i]);
  }
  if (!out) throw Error(Errc::IoError, "failed writing model");
}

ModelFile read_model(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(Errc::FormatError, "not a model file");
  const std::uint64_t header_len = get_u64(in);
  if (header_len > (1ULL << 32)) throw Error(Errc::FormatError, "implausible header length");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error(Errc::FormatError, "truncated model header");
  ModelFile file;
  try {
    file.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("bad model header: ") + e.what());
  }
  if (file.header.value("format_version", 0) != kModelFormatVersion) {
    throw Error(Errc::FormatError, "unsupported model format version");
  }
  if (!file.header.contains("descriptor") ||
      descriptor_hash(file.header["descriptor"]) != file.header.value("descriptor_hash", "")) {
    throw Error(Errc::FormatError, "descriptor hash mismatch");
  }
  const std::uint64_t blocks = get_u64(in);
  for (std::uint64_t b = 0; b < blocks; ++b) {
    const auto rows = static_cast<Index>(get_u64(in));
    const auto cols = static_cast<Index>(get_u64(in));
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = get_f64(in);
    file.blocks.push_back(std::move(m));
  }
  return file;
}

void load_parameters(ParameterSet& params, const ModelFile& file) {
  if (file.blocks.size() != params.size()) {
    throw Error(Errc::FormatError, "model file has " + std::to_string(file.blocks.size()) +
                                       " parameter blocks, architecture expects " +
                                       std::to_string(params.size()));
  }
  const auto& layout = file.header.at("parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const Matrix& block = file.blocks[i];
    if (block.rows() != p.value.rows() || block.cols() != p.value.cols() ||
        layout.at(i).value("name", "") != p.name) {
      throw Error(Errc::FormatError, "parameter block " + std::to_string(i) + " does not match '" +
                                         p.name + "'");
    }
    p.value = block;
  }
}

void save_model_file(const std::string& path, const nlohmann::json& descriptor,
                     nlohmann::json header, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  write_model(out, descriptor, std::move(header), params);
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  return read_model(in);
}

}  // namespace tempo::nn

#include "tempo/detect/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "tempo/core/error.hpp"

namespace tempo::detect {

void check_track(const AudioTrack& track) {
  if (track.sample_rate <= 0) throw Error(Errc::InvalidValue, "audio: sample rate must be positive");
  for (double s : track.samples)
    if (!std::isfinite(s)) throw Error(Errc::InvalidValue, "audio: non-finite sample");
}

namespace {

std::uint32_t u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioTrack read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(Errc::FormatError, path.string() + ": not a RIFF/WAVE file");

  int format = 0, channels = 0, bits = 0;
  AudioTrack track;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw Error(Errc::FormatError, path.string() + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
      format = u16(chunk + 8);
      channels = u16(chunk + 10);
      track.sample_rate = static_cast<int>(u32(chunk + 12));
      bits = u16(chunk + 22);
      // WAVE_FORMAT_EXTENSIBLE carries the real tag in the sub-format GUID
      if (format == 0xFFFE && size >= 26) format = u16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (channels <= 0 || data == nullptr) throw Error(Errc::FormatError, path.string() + ": missing fmt or data chunk");
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32) throw Error(Errc::FormatError, path.string() + ": only 16-bit PCM and 32-bit float are supported");

  const std::size_t width = static_cast<std::size_t>(bits / 8);
  const std::size_t frames = data_size / (width * static_cast<std::size_t>(channels));
  track.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + (f * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)) * width;
      if (pcm16)
        acc += static_cast<std::int16_t>(u16(p)) / 32768.0;
      else
        acc += static_cast<double>(std::bit_cast<float>(u32(p)));
    }
    track.samples[f] = acc / channels;
  }
  check_track(track);
  return track;
}

void write_wav(const std::filesystem::path& path, const AudioTrack& track, WavFormat format) {
  check_track(track);
  const bool pcm = format == WavFormat::Pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size = static_cast<std::uint32_t>(track.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put32(out, 36 + data_size);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, pcm ? 1 : 3);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(track.sample_rate));
  put32(out, static_cast<std::uint32_t>(track.sample_rate) * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  out += "data";
  put32(out, data_size);
  for (double s : track.samples) {
    if (pcm) {
      const double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
    } else {
      put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(Errc::IoError, "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace tempo::detect

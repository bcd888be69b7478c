#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tempo::detect {

struct AudioTrack {
  int sample_rate = 0;
  std::vector<double> samples;

  double duration() const { return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0; }
};

/// InvalidValue unless the rate is positive and every sample is finite.
void check_track(const AudioTrack& track);

enum class WavFormat { Pcm16, Float32 };

/// Reads 16-bit PCM or 32-bit float WAV; multi-channel input is averaged to mono.
AudioTrack read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioTrack& track, WavFormat format = WavFormat::Pcm16);

}  // namespace tempo::detect

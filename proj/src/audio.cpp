// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "mcse/common.hpp"

namespace mcse {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

void append_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

void AudioClip::validate() const {
  if (samples.rows() < 1 || samples.cols() < 1)
    throw DataError("AudioClip: empty clip");
  if (sample_rate <= 0) throw DataError("AudioClip: sample_rate must be > 0");
  if (!samples.allFinite()) throw DataError("AudioClip: non-finite samples");
}

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_wav: cannot open '" + path + "'");
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());

  if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw DataError("read_wav: '" + path + "' missing RIFF/WAVE header");

  bool have_fmt = false;
  std::uint16_t format = 0, num_channels = 0, bits_per_sample = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* tag = reinterpret_cast<const char*>(raw.data() + pos);
    std::uint32_t chunk_size = read_u32(raw.data() + pos + 4);
    std::size_t body = pos + 8;
    if (body + chunk_size > raw.size()) {
      throw DataError("read_wav: '" + path + "' truncated inside '" +
                      std::string(tag, 4) + "' chunk");
    }
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw DataError("read_wav: malformed 'fmt ' chunk");
      format = read_u16(raw.data() + body);
      num_channels = read_u16(raw.data() + body + 2);
      rate = read_u32(raw.data() + body + 4);
      bits_per_sample = read_u16(raw.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = raw.data() + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw DataError("read_wav: '" + path + "' missing 'fmt ' chunk");
  if (data == nullptr) throw DataError("read_wav: '" + path + "' missing 'data' chunk");
  if (num_channels == 0) throw DataError("read_wav: zero channels");

  const bool pcm16 = format == kFormatPcm && bits_per_sample == 16;
  const bool f32 = format == kFormatFloat && bits_per_sample == 32;
  if (!pcm16 && !f32) {
    throw DataError("read_wav: unsupported encoding (format tag " +
                    std::to_string(format) + ", " + std::to_string(bits_per_sample) +
                    " bits); expected PCM16 or float32");
  }

  const std::size_t bytes_per_sample = bits_per_sample / 8;
  const std::size_t frame_bytes = bytes_per_sample * num_channels;
  const std::size_t num_frames = data_size / frame_bytes;
  if (num_frames == 0) throw DataError("read_wav: empty 'data' chunk");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(num_channels, static_cast<Eigen::Index>(num_frames));
  for (std::size_t n = 0; n < num_frames; ++n) {
    for (std::uint16_t m = 0; m < num_channels; ++m) {
      const std::uint8_t* p = data + n * frame_bytes + m * bytes_per_sample;
      double v;
      if (pcm16) {
        std::int16_t s;
        std::memcpy(&s, p, 2);
        v = static_cast<double>(s) / 32768.0;
      } else {
        float s;
        std::memcpy(&s, p, 4);
        v = static_cast<double>(s);
      }
      clip.samples(m, static_cast<Eigen::Index>(n)) = v;
    }
  }
  clip.validate();
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip, WavFormat format) {
  clip.validate();
  const int M = clip.channels();
  const Eigen::Index N = clip.num_samples();
  const bool f32 = format == WavFormat::float32;
  const std::uint16_t bits = f32 ? 32 : 16;
  const std::uint32_t byte_rate = clip.sample_rate * M * bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(N) * M * bits / 8;

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  append_tag(out, "RIFF");
  append_u32(out, 36 + data_size);
  append_tag(out, "WAVE");
  append_tag(out, "fmt ");
  append_u32(out, 16);
  append_u16(out, f32 ? kFormatFloat : kFormatPcm);
  append_u16(out, static_cast<std::uint16_t>(M));
  append_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  append_u32(out, byte_rate);
  append_u16(out, static_cast<std::uint16_t>(M * bits / 8));
  append_u16(out, bits);
  append_tag(out, "data");
  append_u32(out, data_size);

  for (Eigen::Index n = 0; n < N; ++n) {
    for (int m = 0; m < M; ++m) {
      const double v = clip.samples(m, n);
      if (f32) {
        const float s = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &s, 4);
        append_u32(out, u);
      } else {
        double scaled = std::round(v * 32768.0);
        scaled = std::min(32767.0, std::max(-32768.0, scaled));
        const std::int16_t s = static_cast<std::int16_t>(scaled);
        append_u16(out, static_cast<std::uint16_t>(s));
      }
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_wav: cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(out.data()),
           static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("write_wav: short write to '" + path + "'");
}

}  // namespace mcse

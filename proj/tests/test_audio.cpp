#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "ttaug/audio.hpp"
#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

using namespace ttaug;

namespace {

// Hand-rolled WAV bytes, independent of serialize_wav.
std::string raw_wav(uint16_t format_tag, uint16_t channels,
                    uint32_t sample_rate, uint16_t bits,
                    const std::string& data) {
  std::string out = "RIFF";
  put_u32le(out, 36 + static_cast<uint32_t>(data.size()));
  out += "WAVE";
  out += "fmt ";
  put_u32le(out, 16);
  out.push_back(static_cast<char>(format_tag & 0xFF));
  out.push_back(static_cast<char>(format_tag >> 8));
  out.push_back(static_cast<char>(channels & 0xFF));
  out.push_back(static_cast<char>(channels >> 8));
  put_u32le(out, sample_rate);
  put_u32le(out, sample_rate * channels * bits / 8);
  out.push_back(static_cast<char>((channels * bits / 8) & 0xFF));
  out.push_back(static_cast<char>((channels * bits / 8) >> 8));
  out.push_back(static_cast<char>(bits & 0xFF));
  out.push_back(static_cast<char>(bits >> 8));
  out += "data";
  put_u32le(out, static_cast<uint32_t>(data.size()));
  out += data;
  return out;
}

std::string pcm16_payload(const std::vector<int16_t>& samples) {
  std::string data;
  for (int16_t s : samples) {
    data.push_back(static_cast<char>(s & 0xFF));
    data.push_back(static_cast<char>((s >> 8) & 0xFF));
  }
  return data;
}

AudioBuffer ramp_buffer(size_t n, int rate) {
  AudioBuffer a;
  a.sample_rate = rate;
  a.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    a.samples[i] = static_cast<float>(std::sin(0.001 * static_cast<double>(i)));
  }
  return a;
}

}  // namespace

TEST_CASE("pcm16 silence decodes to zeros") {
  std::string bytes =
      raw_wav(1, 1, 16000, 16, pcm16_payload(std::vector<int16_t>(16000, 0)));
  AudioBuffer a = parse_wav(bytes);
  CHECK(a.sample_rate == 16000);
  CHECK(a.samples.size() == 16000);
  for (float s : a.samples) CHECK(s == 0.0f);
}

TEST_CASE("pcm16 full scale maps to 32767/32768") {
  std::string bytes = raw_wav(1, 1, 8000, 16, pcm16_payload({32767, -32768}));
  AudioBuffer a = parse_wav(bytes);
  CHECK(a.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-9));
  CHECK(a.samples[1] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("stereo channels average to mono") {
  // constant (0.5, -0.5) frames
  std::vector<int16_t> interleaved;
  for (int i = 0; i < 100; ++i) {
    interleaved.push_back(16384);   // 0.5
    interleaved.push_back(-16384);  // -0.5
  }
  std::string bytes = raw_wav(1, 2, 16000, 16, pcm16_payload(interleaved));
  AudioBuffer a = parse_wav(bytes);
  CHECK(a.samples.size() == 100);
  for (float s : a.samples) CHECK(s == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("float32 wav round trips exactly") {
  AudioBuffer a = ramp_buffer(777, 22050);
  a.format = WavFormat::kFloat32;
  AudioBuffer b = parse_wav(serialize_wav(a));
  CHECK(b.sample_rate == 22050);
  CHECK(b.format == WavFormat::kFloat32);
  CHECK(b.samples == a.samples);
}

TEST_CASE("pcm16 wav round trips quantized values exactly") {
  AudioBuffer a;
  a.sample_rate = 16000;
  for (int i = -20; i <= 20; ++i) {
    a.samples.push_back(static_cast<float>(i * 800) / 32768.0f);
  }
  AudioBuffer b = parse_wav(serialize_wav(a));
  CHECK(b.samples == a.samples);
}

TEST_CASE("malformed wav errors carry byte offsets") {
  CHECK_THROWS_WITH_AS(parse_wav("RIFX____WAVE"),
                       doctest::Contains("offset 0"), ParseError);
  std::string bad_wave = "RIFF";
  put_u32le(bad_wave, 4);
  bad_wave += "EVAW";
  CHECK_THROWS_WITH_AS(parse_wav(bad_wave), doctest::Contains("offset 8"),
                       ParseError);

  // data chunk declaring more bytes than exist
  std::string truncated =
      raw_wav(1, 1, 16000, 16, pcm16_payload({1, 2, 3, 4}));
  truncated.resize(truncated.size() - 4);
  truncated[40] = 8;  // keep declared size at 8 while file lost 4 bytes
  CHECK_THROWS_AS(parse_wav(truncated), ParseError);
}

TEST_CASE("unsupported codec is an explicit error") {
  std::string bytes = raw_wav(2 /* ADPCM */, 1, 8000, 16,
                              pcm16_payload({0, 0, 0, 0}));
  CHECK_THROWS_WITH_AS(parse_wav(bytes), doctest::Contains("unsupported"),
                       DataError);
}

TEST_CASE("truncate_midpoint: centered window arithmetic") {
  AudioBuffer a = ramp_buffer(160000, 16000);  // 10 s
  SegmentResult r = truncate_midpoint(a, SegmentSpec::seconds(2.0));
  CHECK(r.audio.samples.size() == 32000);
  CHECK(!r.short_input);
  // window is [64000, 96000)
  CHECK(r.audio.samples.front() == a.samples[64000]);
  CHECK(r.audio.samples.back() == a.samples[95999]);
}

TEST_CASE("truncate_midpoint: full spec is identity") {
  AudioBuffer a = ramp_buffer(160000, 16000);
  SegmentResult r = truncate_midpoint(a, SegmentSpec::full_length());
  CHECK(r.audio.samples == a.samples);
  CHECK(!r.short_input);
}

TEST_CASE("truncate_midpoint: short input comes back whole and flagged") {
  AudioBuffer a = ramp_buffer(4800, 16000);  // 0.3 s
  SegmentResult r = truncate_midpoint(a, SegmentSpec::seconds(0.5));
  CHECK(r.audio.samples == a.samples);
  CHECK(r.short_input);
}

TEST_CASE("truncate_midpoint: empty buffer is degenerate") {
  AudioBuffer a;
  CHECK_THROWS_AS(truncate_midpoint(a, SegmentSpec::seconds(1.0)),
                  DegenerateInputError);
}

TEST_CASE("truncate_midpoint: from-midpoint anchor starts at len/2") {
  AudioBuffer a = ramp_buffer(16000, 16000);  // 1 s
  SegmentSpec spec = SegmentSpec::seconds(0.25, SegmentAnchor::kFromMidpoint);
  SegmentResult r = truncate_midpoint(a, spec);
  CHECK(r.audio.samples.size() == 4000);
  CHECK(r.audio.samples.front() == a.samples[8000]);
}

TEST_CASE("truncate_midpoint output is a contiguous subsequence") {
  Rng rng(5);
  for (int it = 0; it < 30; ++it) {
    size_t n = 100 + rng.next_below(5000);
    AudioBuffer a = ramp_buffer(n, 8000);
    double dur = 0.01 + rng.next_unit();
    SegmentResult r = truncate_midpoint(a, SegmentSpec::seconds(dur));
    // locate the window by its first sample, then require equality
    REQUIRE(!r.audio.samples.empty());
    bool found = false;
    for (size_t start = 0; start + r.audio.samples.size() <= n; ++start) {
      if (std::memcmp(a.samples.data() + start, r.audio.samples.data(),
                      r.audio.samples.size() * sizeof(float)) == 0) {
        found = true;
        break;
      }
    }
    CHECK(found);
    if (!r.short_input) {
      double err = std::abs(r.audio.duration_s() - dur);
      CHECK(err <= 1.0 / a.sample_rate);
    }
  }
}

TEST_CASE("repeat_to_duration tiles exactly") {
  AudioBuffer half = ramp_buffer(8000, 16000);  // 0.5 s
  AudioBuffer rep = repeat_to_duration(half, 15.0);
  CHECK(rep.samples.size() == 240000);  // 30 exact copies
  for (int copy = 0; copy < 30; ++copy) {
    CHECK(std::memcmp(rep.samples.data() + copy * 8000, half.samples.data(),
                      8000 * sizeof(float)) == 0);
  }

  AudioBuffer four = ramp_buffer(64000, 16000);  // 4 s
  AudioBuffer rep2 = repeat_to_duration(four, 15.0);
  CHECK(rep2.samples.size() == 240000);  // 3 copies + 3 s of the fourth
  CHECK(std::memcmp(rep2.samples.data() + 3 * 64000, four.samples.data(),
                    48000 * sizeof(float)) == 0);

  AudioBuffer fifteen = ramp_buffer(240000, 16000);
  AudioBuffer cut = repeat_to_duration(fifteen, 2.0);
  CHECK(cut.samples.size() == 32000);
  CHECK(std::memcmp(cut.samples.data(), fifteen.samples.data(),
                    32000 * sizeof(float)) == 0);

  AudioBuffer empty;
  CHECK_THROWS_AS(repeat_to_duration(empty, 15.0), DegenerateInputError);
}

TEST_CASE("repeat_to_duration prefix equals the input") {
  Rng rng(6);
  for (int it = 0; it < 20; ++it) {
    size_t n = 10 + rng.next_below(3000);
    AudioBuffer a = ramp_buffer(n, 16000);
    double target = 0.01 + 2.0 * rng.next_unit();
    AudioBuffer rep = repeat_to_duration(a, target);
    size_t prefix = std::min(n, rep.samples.size());
    CHECK(std::memcmp(rep.samples.data(), a.samples.data(),
                      prefix * sizeof(float)) == 0);
  }
}

TEST_CASE("save_wav/load_wav preserve rate and format") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "ttaug_audio_test";
  fs::create_directories(dir);
  AudioBuffer a = ramp_buffer(1234, 44100);
  a.format = WavFormat::kFloat32;
  save_wav(a, dir / "x.wav");
  AudioBuffer b = load_wav(dir / "x.wav");
  CHECK(b.sample_rate == 44100);
  CHECK(b.format == WavFormat::kFloat32);
  CHECK(b.samples == a.samples);
  fs::remove_all(dir);
}

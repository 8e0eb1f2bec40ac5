#pragma once

// Reference implementations used only to check the library. They share no
// code with it on purpose.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace oracle {

// --- OSC ----------------------------------------------------------------

struct OscValue {
  char tag = 0;
  std::uint32_t bits = 0;  // float32 / int32 raw bits
  std::string text;
};

struct DecodedOsc {
  std::string address;
  std::string tags;  // without the leading ','
  std::vector<OscValue> args;
  float f(std::size_t i) const;
};

/// Strict OSC 1.0 message decoder; nullopt on any malformed input.
std::optional<DecodedOsc> decode_osc(const std::vector<std::uint8_t>& bytes);

/// Splits an int32 length-prefixed OSC stream into packets.
std::optional<std::vector<std::vector<std::uint8_t>>> split_osc_stream(
    const std::vector<std::uint8_t>& stream);

// --- WAV ----------------------------------------------------------------

struct Wav {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  std::uint32_t data_size = 0;
  std::vector<std::int16_t> samples;
};

std::optional<Wav> read_wav(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// --- rotations ----------------------------------------------------------

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Rotation matrix of a unit quaternion (w, x, y, z).
Mat3 quat_matrix(double w, double x, double y, double z);
/// Rz(yaw) * Ry(pitch) * Rx(roll).
Mat3 euler_matrix(double roll, double pitch, double yaw);
double max_abs_diff(const Mat3& a, const Mat3& b);

// --- spectra ------------------------------------------------------------

/// Magnitude spectrum (bins 0..n/2) of a real signal, via FFTW.
std::vector<double> magnitude_spectrum(const std::vector<float>& signal);
double median(std::vector<double> v);
/// Indices of local maxima, strongest first.
std::vector<std::size_t> peaks(const std::vector<double>& mag, std::size_t count);

// --- misc ---------------------------------------------------------------

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace oracle

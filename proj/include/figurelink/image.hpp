#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace figurelink::image {

/// Row-major 8-bit raster, 1 (gray) or 3 (RGB) channels.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, int channels, std::uint8_t fill = 255);
  RasterImage(int width, int height, int channels, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  std::uint8_t at(int x, int y, int c = 0) const noexcept {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  void set(int x, int y, std::uint8_t v) noexcept;  // all channels

  /// Mean over channels.
  double intensity(int x, int y) const noexcept;

  /// Copies the half-open rectangle [x0,x1)x[y0,y1).
  RasterImage crop(int x0, int y0, int x1, int y1) const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> pixels_;
};

struct Dimensions {
  int width = 0;
  int height = 0;
};

/// Codec plug-in point. PNM (P2/P3/P5/P6) is built in.
class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual bool accepts(const std::filesystem::path& path) const = 0;
  virtual RasterImage decode(const std::filesystem::path& path) const = 0;
  /// Header-only size probe; must also reject truncated files.
  virtual Dimensions probe(const std::filesystem::path& path) const = 0;
};

class PnmDecoder final : public Decoder {
 public:
  bool accepts(const std::filesystem::path& path) const override;
  RasterImage decode(const std::filesystem::path& path) const override;
  Dimensions probe(const std::filesystem::path& path) const override;
};

class DecoderRegistry {
 public:
  DecoderRegistry();  // PNM registered
  void add(std::shared_ptr<const Decoder> decoder);
  /// nullptr when no decoder accepts the path.
  const Decoder* find(const std::filesystem::path& path) const;
  /// Throws Error(UnreadableImage).
  RasterImage decode(const std::filesystem::path& path) const;
  Dimensions probe(const std::filesystem::path& path) const;

 private:
  std::vector<std::shared_ptr<const Decoder>> decoders_;
};

RasterImage read_pnm(const std::filesystem::path& path);
/// Binary PGM (1 channel) or PPM (3 channels).
void write_pnm(const RasterImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pnm(const RasterImage& img);

}  // namespace figurelink::image

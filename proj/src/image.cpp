#include "figurelink/image.hpp"

#include "figurelink/error.hpp"

#include <fstream>
#include <sstream>

namespace figurelink::image {

RasterImage::RasterImage(int width, int height, int channels, std::uint8_t fill)
    : RasterImage(width, height, channels,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) *
                                                std::max(channels, 0),
                                            fill)) {}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1 || (channels != 1 && channels != 3)) {
    throw Error(ErrorCode::InvalidArgument, "raster needs width,height >= 1 and 1 or 3 channels");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::InvalidArgument, "pixel buffer size does not match width*height*channels");
  }
}

void RasterImage::set(int x, int y, std::uint8_t v) noexcept {
  const std::size_t base = (static_cast<std::size_t>(y) * width_ + x) * channels_;
  for (int c = 0; c < channels_; ++c) pixels_[base + c] = v;
}

double RasterImage::intensity(int x, int y) const noexcept {
  const std::size_t base = (static_cast<std::size_t>(y) * width_ + x) * channels_;
  if (channels_ == 1) return pixels_[base];
  return (static_cast<double>(pixels_[base]) + pixels_[base + 1] + pixels_[base + 2]) / 3.0;
}

RasterImage RasterImage::crop(int x0, int y0, int x1, int y1) const {
  if (x0 < 0 || y0 < 0 || x1 > width_ || y1 > height_ || x0 >= x1 || y0 >= y1) {
    throw Error(ErrorCode::InvalidArgument, "crop rectangle outside image");
  }
  const int w = x1 - x0;
  const int h = y1 - y0;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * channels_);
  for (int y = 0; y < h; ++y) {
    const auto* src = pixels_.data() + (static_cast<std::size_t>(y0 + y) * width_ + x0) * channels_;
    std::copy(src, src + static_cast<std::size_t>(w) * channels_, px.data() + static_cast<std::size_t>(y) * w * channels_);
  }
  return RasterImage(w, h, channels_, std::move(px));
}

namespace {

struct PnmHeader {
  char kind = 0;  // '2', '3', '5', '6'
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;

  int channels() const noexcept { return kind == '3' || kind == '6' ? 3 : 1; }
  bool binary() const noexcept { return kind == '5' || kind == '6'; }
};

[[noreturn]] void unreadable(const std::filesystem::path& path, const std::string& why) {
  throw Error(ErrorCode::UnreadableImage, path.string() + ": " + why);
}

// Reads the next header integer, skipping whitespace and '#' comments.
bool next_int(const std::string& buf, std::size_t& pos, int& value) {
  while (pos < buf.size()) {
    const char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= buf.size() || buf[pos] < '0' || buf[pos] > '9') return false;
  long v = 0;
  while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
    v = v * 10 + (buf[pos] - '0');
    if (v > (1L << 24)) return false;
    ++pos;
  }
  value = static_cast<int>(v);
  return true;
}

PnmHeader parse_header(const std::string& buf, const std::filesystem::path& path) {
  PnmHeader h;
  if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '2' && buf[1] != '3' && buf[1] != '5' && buf[1] != '6')) {
    unreadable(path, "not a PGM/PPM file");
  }
  h.kind = buf[1];
  std::size_t pos = 2;
  if (!next_int(buf, pos, h.width) || !next_int(buf, pos, h.height) || !next_int(buf, pos, h.maxval)) {
    unreadable(path, "bad PNM header");
  }
  if (h.width < 1 || h.height < 1) unreadable(path, "zero image dimension");
  if (h.maxval < 1 || h.maxval > 255) unreadable(path, "only 8-bit PNM is supported");
  if (pos >= buf.size() && h.binary()) unreadable(path, "missing pixel data");
  h.data_offset = pos + 1;  // exactly one whitespace byte after maxval
  return h;
}

std::string read_prefix(const std::filesystem::path& path, std::size_t limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) unreadable(path, "cannot open");
  std::string buf(limit, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(limit));
  buf.resize(static_cast<std::size_t>(in.gcount()));
  return buf;
}

}  // namespace

bool PnmDecoder::accepts(const std::filesystem::path& path) const {
  const std::string ext = path.extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

Dimensions PnmDecoder::probe(const std::filesystem::path& path) const {
  const std::string head = read_prefix(path, 512);
  const PnmHeader h = parse_header(head, path);
  if (h.binary()) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) unreadable(path, "cannot stat");
    const auto need = h.data_offset + static_cast<std::uintmax_t>(h.width) * h.height * h.channels();
    if (size < need) unreadable(path, "truncated pixel data");
  }
  return {h.width, h.height};
}

RasterImage PnmDecoder::decode(const std::filesystem::path& path) const {
  std::ifstream in(path, std::ios::binary);
  if (!in) unreadable(path, "cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  const PnmHeader h = parse_header(buf, path);
  const std::size_t count = static_cast<std::size_t>(h.width) * h.height * h.channels();
  std::vector<std::uint8_t> px(count);
  if (h.binary()) {
    if (buf.size() < h.data_offset + count) unreadable(path, "truncated pixel data");
    for (std::size_t i = 0; i < count; ++i) px[i] = static_cast<std::uint8_t>(buf[h.data_offset + i]);
  } else {
    std::size_t pos = h.data_offset - 1;
    for (std::size_t i = 0; i < count; ++i) {
      int v = 0;
      if (!next_int(buf, pos, v) || v > h.maxval) unreadable(path, "bad ASCII sample");
      px[i] = static_cast<std::uint8_t>(v);
    }
  }
  if (h.maxval != 255) {
    for (auto& v : px) v = static_cast<std::uint8_t>((static_cast<int>(v) * 255 + h.maxval / 2) / h.maxval);
  }
  return RasterImage(h.width, h.height, h.channels(), std::move(px));
}

DecoderRegistry::DecoderRegistry() { decoders_.push_back(std::make_shared<PnmDecoder>()); }

void DecoderRegistry::add(std::shared_ptr<const Decoder> decoder) { decoders_.push_back(std::move(decoder)); }

const Decoder* DecoderRegistry::find(const std::filesystem::path& path) const {
  for (const auto& d : decoders_) {
    if (d->accepts(path)) return d.get();
  }
  return nullptr;
}

RasterImage DecoderRegistry::decode(const std::filesystem::path& path) const {
  const Decoder* d = find(path);
  if (d == nullptr) unreadable(path, "no decoder for this format");
  return d->decode(path);
}

Dimensions DecoderRegistry::probe(const std::filesystem::path& path) const {
  const Decoder* d = find(path);
  if (d == nullptr) unreadable(path, "no decoder for this format");
  return d->probe(path);
}

RasterImage read_pnm(const std::filesystem::path& path) { return PnmDecoder().decode(path); }

std::vector<std::uint8_t> encode_pnm(const RasterImage& img) {
  const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width()) +
                             " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels().begin(), img.pixels().end());
  return out;
}

void write_pnm(const RasterImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::OutputUnwritable, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::OutputUnwritable, "short write to " + path.string());
}

}  // namespace figurelink::image

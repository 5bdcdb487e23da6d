#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "planedepth/io.hpp"

namespace planedepth {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

enum class Want { Rgb8, Gray16, Gray8 };

struct RawPng {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bytes;  // tightly packed rows
};

// libpng reports errors by longjmp; keep everything with a destructor outside
// the setjmp frame.
bool decode(std::FILE* f, Want want, RawPng& out, char* message, std::size_t message_size) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    std::snprintf(message, message_size, "cannot allocate PNG decoder");
    return false;
  }
  png_bytep* rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete[] rows;
    png_destroy_read_struct(&png, &info, nullptr);
    std::snprintf(message, message_size, "corrupt PNG data");
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (want == Want::Rgb8) {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  } else {
    const int expected = want == Want::Gray16 ? 16 : 8;
    if (color != PNG_COLOR_TYPE_GRAY || depth != expected) {
      png_destroy_read_struct(&png, &info, nullptr);
      std::snprintf(message, message_size, "expected a %d-bit single-channel PNG", expected);
      return false;
    }
  }
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.bytes.resize(stride * h);
  rows = new png_bytep[h];
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = out.bytes.data() + r * stride;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  delete[] rows;
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

RawPng read_png(const std::filesystem::path& path, Want want) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw Error(ErrorKind::Parse, path.string() + ": not a PNG file (byte offset 0)");
  std::rewind(f.get());
  RawPng raw;
  char message[128];
  if (!decode(f.get(), want, raw, message, sizeof message)) throw Error(ErrorKind::Parse, path.string() + ": " + message);
  return raw;
}

bool encode(std::FILE* f, int width, int height, int color, int depth, const std::uint8_t* bytes,
            std::size_t stride) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r) png_write_row(png, bytes + static_cast<std::size_t>(r) * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_png(const std::filesystem::path& path, int width, int height, int color, int depth,
               const std::vector<std::uint8_t>& bytes) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidInput, "cannot write an empty image");
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorKind::Io, "cannot create " + path.string());
  const std::size_t stride = bytes.size() / static_cast<std::size_t>(height);
  if (!encode(f.get(), width, height, color, depth, bytes.data(), stride))
    throw Error(ErrorKind::Io, "failed writing " + path.string());
  if (std::fflush(f.get()) != 0) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

std::vector<std::uint8_t> pack16(const Grid<std::uint16_t>& values) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(values.size()) * 2);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(values(i) >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(values(i) & 0xff);
  }
  return bytes;
}

Grid<std::uint16_t> unpack16(const RawPng& raw) {
  Grid<std::uint16_t> values(raw.height, raw.width);
  for (Eigen::Index i = 0; i < values.size(); ++i)
    values(i) = static_cast<std::uint16_t>((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1]);
  return values;
}

}  // namespace

RgbImage read_rgb_png(const std::filesystem::path& path) {
  RawPng raw = read_png(path, Want::Rgb8);
  RgbImage image;
  image.width = raw.width;
  image.height = raw.height;
  image.data = std::move(raw.bytes);
  return image;
}

void write_rgb_png(const RgbImage& image, const std::filesystem::path& path) {
  if (image.data.size() != static_cast<std::size_t>(image.width) * image.height * 3)
    throw Error(ErrorKind::InvalidInput, "image buffer size does not match its dimensions");
  write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, image.data);
}

void write_depth_png(const DenseDepth& depth, const std::filesystem::path& path) {
  Grid<std::uint16_t> values(depth.height(), depth.width());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double d = depth.depth(i);
    if (!(d > 0.0) || !std::isfinite(d)) {
      values(i) = 0;
      continue;
    }
    const double q = std::round(d * 256.0);
    if (q > 65535.0) throw Error(ErrorKind::Range, "depth " + std::to_string(d) + " m exceeds the 16-bit PNG range");
    values(i) = static_cast<std::uint16_t>(q);
  }
  write_png(path, depth.width(), depth.height(), PNG_COLOR_TYPE_GRAY, 16, pack16(values));
}

DenseDepth read_depth_png(const std::filesystem::path& path) {
  const Grid<std::uint16_t> values = unpack16(read_png(path, Want::Gray16));
  DenseDepth d(static_cast<int>(values.cols()), static_cast<int>(values.rows()));
  d.depth = values.cast<double>() / 256.0;
  return d;
}

void write_label_png(const LabelGrid& labels, const std::filesystem::path& path) {
  if (labels.size() > 0 && (labels.minCoeff() < 0 || labels.maxCoeff() > 65535))
    throw Error(ErrorKind::Range, "labels must lie in [0, 65535] for a 16-bit PNG");
  write_png(path, static_cast<int>(labels.cols()), static_cast<int>(labels.rows()), PNG_COLOR_TYPE_GRAY, 16,
            pack16(labels.cast<std::uint16_t>()));
}

LabelGrid read_label_png(const std::filesystem::path& path) {
  return unpack16(read_png(path, Want::Gray16)).cast<std::int32_t>();
}

void write_mask_png(const MaskGrid& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(mask.size()));
  for (Eigen::Index i = 0; i < mask.size(); ++i) bytes[i] = mask(i) ? 255 : 0;
  write_png(path, static_cast<int>(mask.cols()), static_cast<int>(mask.rows()), PNG_COLOR_TYPE_GRAY, 8, bytes);
}

MaskGrid read_mask_png(const std::filesystem::path& path) {
  const RawPng raw = read_png(path, Want::Gray8);
  MaskGrid mask(raw.height, raw.width);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = raw.bytes[i] ? 1 : 0;
  return mask;
}

RgbImage boundary_overlay(const RgbImage& image, const LabelGrid& labels) {
  if (labels.rows() != image.height || labels.cols() != image.width)
    throw Error(ErrorKind::InvalidInput, "label map and image sizes differ");
  RgbImage out = image;
  for (int v = 0; v < image.height; ++v)
    for (int u = 0; u < image.width; ++u) {
      const bool edge = (u + 1 < image.width && labels(v, u + 1) != labels(v, u)) ||
                        (v + 1 < image.height && labels(v + 1, u) != labels(v, u));
      if (!edge) continue;
      std::uint8_t* px = out.at(u, v);
      px[0] = 255;
      px[1] = 0;
      px[2] = 0;
    }
  return out;
}

}  // namespace planedepth

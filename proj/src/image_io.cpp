#include "dopt/image_io.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "dopt/error.hpp"

namespace dopt::io {
namespace {

static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian");

std::string where(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open " + where(path));
  return f;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const PfmImage& image) {
  if (image.channels != 1 && image.channels != 3) throw IoError("PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + where(path));
  out << (image.channels == 3 ? "PF" : "Pf") << "\n"
      << image.width << " " << image.height << "\n-1.0\n";
  // PFM stores rows bottom to top
  const std::size_t row = image.width * image.channels;
  for (std::size_t y = image.height; y-- > 0;) {
    out.write(reinterpret_cast<const char*>(image.data.data() + y * row),
              static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + where(path));
}

PfmImage read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + where(path));
  std::string magic;
  PfmImage img;
  double scale = 0.0;
  in >> magic >> img.width >> img.height >> scale;
  if (!in || (magic != "PF" && magic != "Pf")) throw IoError("not a PFM file: " + where(path));
  if (scale >= 0.0) throw IoError("big-endian PFM is not supported: " + where(path));
  in.get();  // single whitespace after the scale
  img.channels = magic == "PF" ? 3 : 1;
  const std::size_t row = img.width * img.channels;
  img.data.resize(row * img.height);
  for (std::size_t y = img.height; y-- > 0;) {
    in.read(reinterpret_cast<char*>(img.data.data() + y * row),
            static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!in) throw IoError("truncated PFM data in " + where(path));
  return img;
}

void write_pfm(const std::filesystem::path& path, const RealArray& gray) {
  PfmImage img{gray.cols(), gray.rows(), 1, {}};
  img.data.reserve(gray.size());
  for (double v : gray) img.data.push_back(static_cast<float>(v));
  write_pfm(path, img);
}

void write_pfm(const std::filesystem::path& path, const ColorImage& color) {
  PfmImage img{color.width(), color.height(), 3, {}};
  img.data.resize(color.width() * color.height() * 3);
  for (std::size_t i = 0; i < color.width() * color.height(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      img.data[3 * i + c] = static_cast<float>(color.channels[c][i]);
    }
  }
  write_pfm(path, img);
}

RealArray read_pfm_gray(const std::filesystem::path& path) {
  const PfmImage img = read_pfm(path);
  if (img.channels != 1) throw IoError("expected a single-channel PFM: " + where(path));
  RealArray out(img.height, img.width);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.data[i];
  return out;
}

ColorImage read_pfm_color(const std::filesystem::path& path) {
  const PfmImage img = read_pfm(path);
  if (img.channels != 3) throw IoError("expected a 3-channel PFM: " + where(path));
  ColorImage out(img.height, img.width);
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.channels[c][i] = img.data[3 * i + c];
  }
  return out;
}

PngImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a PNG file: " + where(path));
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  PngImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG data in " + where(path));
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);  // native little-endian 16-bit samples
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * img.height);
  rows.resize(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = img.width * img.height * img.channels;
  img.samples.resize(count);
  if (img.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint16_t v;
      std::memcpy(&v, raw.data() + 2 * i, 2);
      img.samples[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) img.samples[i] = raw[i];
  }
  return img;
}

namespace {

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               int color_type, int bit_depth, const unsigned char* data, std::size_t rowbytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + where(path));
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  for (std::size_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + y * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, const ByteImage& image) {
  if (image.rgb.size() != image.width * image.height * 3) throw IoError("RGB buffer size mismatch");
  write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, image.rgb.data(),
            image.width * 3);
}

void write_png_gray16(const std::filesystem::path& path, std::size_t width, std::size_t height,
                      const std::vector<std::uint16_t>& samples) {
  if (samples.size() != width * height) throw IoError("gray16 buffer size mismatch");
  write_png(path, width, height, PNG_COLOR_TYPE_GRAY, 16,
            reinterpret_cast<const unsigned char*>(samples.data()), width * 2);
}

ByteImage read_png_rgb8(const std::filesystem::path& path) {
  const PngImage png = read_png(path);
  if (png.bit_depth != 8) throw IoError("expected an 8-bit PNG: " + where(path));
  ByteImage out{png.height, png.width, {}};
  out.rgb.resize(png.width * png.height * 3);
  for (std::size_t i = 0; i < png.width * png.height; ++i) {
    const std::uint16_t* px = png.samples.data() + i * png.channels;
    for (std::size_t c = 0; c < 3; ++c) {
      out.rgb[3 * i + c] = static_cast<std::uint8_t>(png.channels >= 3 ? px[c] : px[0]);
    }
  }
  return out;
}

}  // namespace dopt::io

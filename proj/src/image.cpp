#include "mkg/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "mkg/error.hpp"

namespace mkg {

RawImage::RawImage(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill)
    : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

void RawImage::validate() const {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidImage, "zero dimension");
  if (channels != 1 && channels != 3) throw Error(ErrorCode::InvalidImage, "channels must be 1 or 3");
  if (pixels.size() != width * height * channels) throw Error(ErrorCode::InvalidImage, "pixel buffer size mismatch");
}

RawImage RawImage::crop_rows(std::size_t begin, std::size_t end) const {
  RawImage out;
  out.width = width;
  out.height = end - begin;
  out.channels = channels;
  const std::size_t stride = width * channels;
  out.pixels.assign(pixels.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                    pixels.begin() + static_cast<std::ptrdiff_t>(end * stride));
  return out;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit))
    throw Error(ErrorCode::InvalidImage, "bad header in " + path.string());
  return std::stoul(tok);
}

}  // namespace

RawImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  const std::string magic = header_token(in);
  std::size_t channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw Error(ErrorCode::InvalidImage, "not a binary PGM/PPM: " + path.string());
  }
  const std::size_t w = header_number(in, path);
  const std::size_t h = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (maxval != 255) throw Error(ErrorCode::InvalidImage, "maxval must be 255: " + path.string());
  RawImage img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw Error(ErrorCode::InvalidImage, "truncated pixel data: " + path.string());
  img.validate();
  return img;
}

void write_pnm(const RawImage& img, const std::filesystem::path& path) {
  img.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

RawImage fit_to(const RawImage& img, std::size_t width, std::size_t height, std::size_t channels) {
  img.validate();
  RawImage out(width, height, channels);
  const double sy = static_cast<double>(img.height) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width) / static_cast<double>(width);
  auto sample = [&](double y, double x, std::size_t ch) {
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const auto y0 = static_cast<std::size_t>(y), x0 = static_cast<std::size_t>(x);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
    const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
    auto px = [&](std::size_t r, std::size_t c) {
      if (img.channels == 3 && channels == 1)
        return (img.at(r, c, 0) + img.at(r, c, 1) + img.at(r, c, 2)) / 3.0;
      return static_cast<double>(img.at(r, c, img.channels == 1 ? 0 : ch));
    };
    return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x1)) + fy * ((1 - fx) * px(y1, x0) + fx * px(y1, x1));
  };
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double v = sample((static_cast<double>(r) + 0.5) * sy - 0.5, (static_cast<double>(c) + 0.5) * sx - 0.5, ch);
        out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  return out;
}

}  // namespace mkg

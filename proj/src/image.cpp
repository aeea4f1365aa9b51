#include "btnet/image.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace btnet {

Image Image::create(int channels, int height, int width, float fill) {
  if ((channels != 1 && channels != 3) || height < 1 || width < 1)
    throw std::invalid_argument("image dims must be positive with 1 or 3 channels");
  Image img;
  img.channels = channels;
  img.height = height;
  img.width = width;
  img.values.assign(static_cast<std::size_t>(channels) * height * width, fill);
  return img;
}

namespace {

// next whitespace-delimited token, skipping '#' comments
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw std::runtime_error("unexpected end of NetPBM header");
  return tok;
}

int parse_int(const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("bad NetPBM ") + what + ": '" + tok + "'");
  }
}

}  // namespace

Image read_netpbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);
  std::string magic = next_token(in);
  int channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw std::runtime_error("unsupported NetPBM magic '" + magic + "' in " + path);
  const int width = parse_int(next_token(in), "width");
  const int height = parse_int(next_token(in), "height");
  const int maxval = parse_int(next_token(in), "maxval");
  if (width < 1 || height < 1) throw std::runtime_error("bad NetPBM dimensions in " + path);
  if (maxval < 1 || maxval > 255)
    throw std::runtime_error("NetPBM maxval must be in [1,255] in " + path);
  // header ends with exactly one whitespace byte, already consumed by next_token

  const std::size_t count = static_cast<std::size_t>(channels) * height * width;
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count)
    throw std::runtime_error("truncated NetPBM pixel data in " + path);

  Image img = Image::create(channels, height, width);
  const float scale = 1.0f / static_cast<float>(maxval);
  // raw data is interleaved per pixel; storage is planar
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(c, y, x) =
            raw[(static_cast<std::size_t>(y) * width + x) * channels + c] * scale;
  return img;
}

void write_netpbm(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_netpbm expects 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.channels) * img.height * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        raw[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] =
            static_cast<unsigned char>(v * 255.0f + 0.5f);
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image g = Image::create(1, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      g.at(0, y, x) = (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / 3.0f;
  return g;
}

}  // namespace btnet

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "fp/errors.hpp"
#include "fp/imgproc.hpp"

namespace fp {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream &in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty())
        break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int header_int(std::istream &in, const std::filesystem::path &path,
               const char *what) {
  const std::string tok = header_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size())
      return v;
  } catch (const std::exception &) {
  }
  throw ParseError(path.string() + ": bad PGM " + what + " '" + tok + "'");
}

} // namespace

GrayImage read_pgm(const std::filesystem::path &path, double dpi) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  if (header_token(in) != "P5")
    throw ParseError(path.string() + ": not a binary PGM (P5)");
  const int w = header_int(in, path, "width");
  const int h = header_int(in, path, "height");
  const int maxval = header_int(in, path, "maxval");
  if (maxval <= 0 || maxval > 255)
    throw ParseError(path.string() + ": only 8-bit PGM is supported");
  if (w < GrayImage::kMinSide || h < GrayImage::kMinSide)
    throw ParseError(path.string() + ": image smaller than 32x32");

  std::string data(static_cast<std::size_t>(w) * h, '\0');
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size()))
    throw ParseError(path.string() + ": truncated pixel data");

  GrayImage img(w, h, dpi);
  auto &px = img.pixels();
  for (std::size_t i = 0; i < data.size(); ++i)
    px[i] = std::min(1.0, static_cast<unsigned char>(data[i]) /
                              static_cast<double>(maxval));
  return img;
}

void write_pgm(const std::filesystem::path &path, const GrayImage &img) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::string data(img.size(), '\0');
  const auto &px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i)
    data[i] = static_cast<char>(
        static_cast<unsigned char>(std::lround(std::clamp(px[i], 0.0, 1.0) * 255.0)));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out)
    throw IoError("write failed for " + path.string());
}

} // namespace fp

#include "aec/image_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace aec {
namespace {

// Skips whitespace and '#' comments between header tokens.
int read_header_int(std::istream& in, const std::filesystem::path& path) {
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value) || value <= 0) throw FormatError("bad graymap header in " + path.string());
  return value;
}

Image read_pgm_raw(const std::filesystem::path& path, int& maxval) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '2'))
    throw FormatError("not a portable graymap: " + path.string());
  const int cols = read_header_int(in, path);
  const int rows = read_header_int(in, path);
  maxval = read_header_int(in, path);
  if (maxval > 65535) throw FormatError("graymap maxval out of range in " + path.string());

  Image raw(rows, cols);
  if (magic[1] == '2') {
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
      int v = 0;
      if (!(in >> v)) throw FormatError("truncated graymap " + path.string());
      raw.data()[i] = v;
    }
    return raw;
  }
  in.get();  // single whitespace byte after maxval
  const int bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols * bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw FormatError("truncated graymap " + path.string());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    raw.data()[i] = bytes == 1 ? buf[i] : (buf[2 * i] << 8) | buf[2 * i + 1];
  }
  return raw;
}

void write_pgm_raw(const std::filesystem::path& path, const Eigen::Ref<const Image>& levels, int maxval) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << levels.cols() << ' ' << levels.rows() << '\n' << maxval << '\n';
  const int bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> buf(static_cast<std::size_t>(levels.size()) * bytes);
  for (Eigen::Index r = 0, i = 0; r < levels.rows(); ++r) {
    for (Eigen::Index c = 0; c < levels.cols(); ++c, ++i) {
      const auto v = static_cast<unsigned>(levels(r, c));
      if (bytes == 1) {
        buf[i] = static_cast<unsigned char>(v);
      } else {
        buf[2 * i] = static_cast<unsigned char>(v >> 8);
        buf[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
      }
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  int maxval = 0;
  Image raw = read_pgm_raw(path, maxval);
  return raw / static_cast<double>(maxval);
}

void write_pgm(const std::filesystem::path& path, const Image& image, int maxval) {
  if (maxval != 255 && maxval != 65535) throw std::invalid_argument("maxval must be 255 or 65535");
  Image levels = (image.max(0.0).min(1.0) * maxval).round();
  write_pgm_raw(path, levels, maxval);
}

Image read_disparity_pgm(const std::filesystem::path& path) {
  int maxval = 0;
  Image raw = read_pgm_raw(path, maxval);
  if (maxval != 65535) throw FormatError("disparity graymap must be 16-bit: " + path.string());
  return (raw - kDisparityPgmOffset) / kDisparityPgmScale;
}

void write_disparity_pgm(const std::filesystem::path& path, const Image& disparity) {
  Image levels = (disparity * kDisparityPgmScale + kDisparityPgmOffset).round();
  if ((levels < 0).any() || (levels > 65535).any())
    throw std::invalid_argument("disparity out of 16-bit encodable range");
  write_pgm_raw(path, levels, 65535);
}

Image read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw FormatError("non-numeric cell '" + cell + "' in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("ragged table in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("empty table " + path.string());
  Image table(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) table(r, c) = rows[r][c];
  return table;
}

void write_csv_table(const std::filesystem::path& path, const Image& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
      if (c) out << ',';
      auto res = std::to_chars(buf, buf + sizeof buf, table(r, c));
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Image read_disparity(const std::filesystem::path& path) {
  if (path.extension() == ".pgm") return read_disparity_pgm(path);
  return read_csv_table(path);
}

}  // namespace aec

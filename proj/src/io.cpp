#include "rot/io.hpp"

#include <openssl/evp.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace rot::io {

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
  return buffer.str();
}

std::vector<double> parse_row(const std::string& line, const fs::path& path, std::size_t number) {
  std::vector<double> row;
  const char* p = line.c_str();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ',' || *p == ' ' || *p == '\t' || *p == '\r' || *p == ';')) ++p;
    if (p >= end) break;
    char* next = nullptr;
    errno = 0;
    const double v = std::strtod(p, &next);
    if (next == p || errno == ERANGE)
      throw IoError("'" + path.string() + "' line " + std::to_string(number) +
                    ": cannot parse a number");
    row.push_back(v);
    p = next;
  }
  return row;
}

std::vector<std::vector<double>> read_rows(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto row = parse_row(line, path, number);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("'" + path.string() + "' contains no numbers");
  return rows;
}

// Next whitespace-delimited header token of a PGM, skipping comments.
std::string pgm_token(const std::string& data, std::size_t& pos) {
  for (;;) {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (pos < data.size() && data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
  return data.substr(start, pos - start);
}

long pgm_number(const std::string& data, std::size_t& pos, const fs::path& path) {
  const std::string token = pgm_token(data, pos);
  try {
    std::size_t used = 0;
    const long value = std::stol(token, &used);
    if (used != token.size() || value < 0) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw IoError("'" + path.string() + "': malformed PGM header");
  }
}

IntensityImage read_pgm(const fs::path& path, double pixel_size) {
  const std::string data = read_file(path);
  std::size_t pos = 0;
  const std::string magic = pgm_token(data, pos);
  if (magic != "P2" && magic != "P5") throw IoError("'" + path.string() + "' is not a PGM");
  const long width = pgm_number(data, pos, path);
  const long height = pgm_number(data, pos, path);
  const long maxval = pgm_number(data, pos, path);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    throw IoError("'" + path.string() + "': unsupported PGM dimensions or depth");
  IntensityImage image{width, height, pixel_size, Vector(width * height)};
  const Index count = width * height;
  if (magic == "P2") {
    for (Index k = 0; k < count; ++k) image.intensities[k] = double(pgm_number(data, pos, path));
  } else {
    ++pos;  // single whitespace byte after maxval
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    if (data.size() < pos + std::size_t(count) * bytes)
      throw IoError("'" + path.string() + "': truncated PGM data");
    for (Index k = 0; k < count; ++k) {
      const auto* p = reinterpret_cast<const unsigned char*>(data.data() + pos + std::size_t(k) * bytes);
      image.intensities[k] = bytes == 2 ? double((p[0] << 8) | p[1]) : double(p[0]);
    }
  }
  return image;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Matrix read_csv_matrix(const fs::path& path) {
  const auto rows = read_rows(path);
  Matrix out(Index(rows.size()), Index(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size())
      throw IoError("'" + path.string() + "': rows have different lengths");
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(Index(i), Index(j)) = rows[i][j];
  }
  return out;
}

Vector read_csv_vector(const fs::path& path) {
  std::vector<double> all;
  for (const auto& row : read_rows(path)) all.insert(all.end(), row.begin(), row.end());
  return Eigen::Map<const Vector>(all.data(), Index(all.size()));
}

std::vector<Index> read_sample_indices(const fs::path& path, Index n) {
  std::vector<Index> out;
  for (const auto& row : read_rows(path)) {
    for (const double v : row) {
      if (v != std::floor(v) || v < 1 || v > double(n))
        throw ConfigError("'" + path.string() + "': sample index " + format_value(v) +
                          " is not in 1.." + std::to_string(n));
      out.push_back(Index(v) - 1);
    }
  }
  return out;
}

IntensityImage read_image(const fs::path& path, double pixel_size) {
  if (path.extension() == ".pgm") return read_pgm(path, pixel_size);
  const Matrix m = read_csv_matrix(path);
  IntensityImage image{m.cols(), m.rows(), pixel_size, Vector(m.size())};
  for (Index y = 0; y < m.rows(); ++y)
    for (Index x = 0; x < m.cols(); ++x) image.intensities[y * m.cols() + x] = m(y, x);
  return image;
}

std::string format_csv(const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_value(m(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string format_csv_rows(const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += format_value(row[j]);
    }
    out += '\n';
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  const std::string data = read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 computation failed");
  std::ostringstream hex;
  for (unsigned int k = 0; k < length; ++k)
    hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return hex.str();
}

void OutputSet::add(fs::path path, std::string content) {
  files_.emplace_back(std::move(path), std::move(content));
}

void OutputSet::commit() const {
  std::vector<fs::path> staged;
  auto cleanup = [&] {
    std::error_code ignored;
    for (const auto& p : staged) fs::remove(p, ignored);
  };
  try {
    for (const auto& [path, content] : files_) {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      fs::path temp = path;
      temp += ".tmp";
      std::ofstream out(temp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write '" + temp.string() + "'");
      staged.push_back(temp);
      out << content;
      out.close();
      if (!out) throw IoError("cannot write '" + temp.string() + "'");
    }
    for (std::size_t k = 0; k < files_.size(); ++k) fs::rename(staged[k], files_[k].first);
  } catch (const fs::filesystem_error& e) {
    cleanup();
    throw IoError(e.what());
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace rot::io

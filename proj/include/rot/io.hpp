#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rot/coloc.hpp"
#include "rot/space.hpp"

namespace rot::io {

namespace fs = std::filesystem;

/// Headerless numeric CSV; commas and/or whitespace separate cells. Rows must
/// have equal length.
Matrix read_csv_matrix(const fs::path& path);

/// All cells of a headerless CSV, row-major.
Vector read_csv_vector(const fs::path& path);

/// Whitespace- or comma-separated 1-based point indices, returned 0-based.
std::vector<Index> read_sample_indices(const fs::path& path, Index n);

/// Plain (P2) or raw (P5) PGM with 8- or 16-bit samples, or a headerless CSV
/// matrix (rows are image rows).
IntensityImage read_image(const fs::path& path, double pixel_size);

/// Cells printed with %.17g so values round-trip exactly.
std::string format_csv(const Matrix& m);
std::string format_csv_rows(const std::vector<std::vector<double>>& rows);

std::string sha256_file(const fs::path& path);

/// Output files staged in memory and published together: every file is
/// written to a temporary sibling first, then all are renamed into place.
class OutputSet {
 public:
  void add(fs::path path, std::string content);
  const std::vector<std::pair<fs::path, std::string>>& files() const noexcept { return files_; }
  void commit() const;

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

}  // namespace rot::io

#pragma once

#include "rngd/dataset.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace rngd {

/// Sparse "label idx:val ..." text with 1-based indices. Binary label sets
/// are mapped to {0, 1} in sorted order, larger sets to 0..K-1; the original
/// label text is kept in label_names. d_override = 0 means the largest index.
Dataset parse_libsvm(std::istream& in, Index d_override = 0, const std::string& name = "libsvm");
Dataset parse_libsvm(const std::filesystem::path& path, Index d_override = 0);
/// Zero entries are omitted; numbers use the shortest round-trip form.
void write_libsvm(std::ostream& out, const Dataset& ds);

struct CsvOptions {
  bool header = false;
  /// Label column by index; negative counts from the end (-1 = last).
  int label_column = -1;
  /// Label column by header name; overrides label_column when non-empty.
  std::string label_name;
  char delimiter = ',';
};

Dataset parse_csv(std::istream& in, const CsvOptions& opt = {}, const std::string& name = "csv");
Dataset parse_csv(const std::filesystem::path& path, const CsvOptions& opt = {});
/// Writes the label first, then the features; a header row is written when
/// header is true.
void write_csv(std::ostream& out, const Dataset& ds, bool header = true);

/// IDX image file (magic 0x803, unsigned bytes scaled to [0, 1]) with its
/// IDX label file (magic 0x801). max_rows = 0 reads everything.
Dataset parse_idx(const std::filesystem::path& images, const std::filesystem::path& labels, Index max_rows = 0);

/// Shortest decimal form that reads back to the same double, independent of
/// the C locale.
std::string format_double(double v);

/// Writes text to a temporary sibling and renames it over path.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace rngd

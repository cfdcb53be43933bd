#include "rngd/io.hpp"

#include "rngd/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

namespace rngd {

namespace {

bool parse_number(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

[[noreturn]] void parse_fail(const std::string& src, std::size_t line, const std::string& msg) {
  fail(ErrorKind::ParseError, src + ":" + std::to_string(line) + ": " + msg);
}

/// Maps raw label text to class indices. Numeric label sets are ordered by
/// value, others lexicographically.
void assign_labels(Dataset& ds, const std::vector<std::string>& raw) {
  std::vector<std::string> uniq(raw.begin(), raw.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  bool numeric = true;
  for (const auto& u : uniq) {
    double v;
    numeric = numeric && parse_number(u, v);
  }
  if (numeric) {
    std::stable_sort(uniq.begin(), uniq.end(), [](const std::string& a, const std::string& b) {
      double x, y;
      parse_number(a, x);
      parse_number(b, y);
      return x < y;
    });
  }
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < uniq.size(); ++i) index[uniq[i]] = static_cast<int>(i);
  ds.y.resize(static_cast<Index>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) ds.y(static_cast<Index>(i)) = index.at(raw[i]);
  ds.label_names = uniq;
  ds.classes = std::max<int>(2, static_cast<int>(uniq.size()));
}

std::string label_text(const Dataset& ds, Index i) {
  const auto c = static_cast<std::size_t>(ds.y(i));
  if (c < ds.label_names.size()) return ds.label_names[c];
  return format_double(ds.y(i));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) fail(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    fail(ErrorKind::IoError, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

// -------------------------------------------------------------------- libsvm

Dataset parse_libsvm(std::istream& in, Index d_override, const std::string& name) {
  struct Entry {
    std::size_t row;
    Index col;
    double val;
  };
  std::vector<std::string> labels;
  std::vector<Entry> entries;
  Index max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;
    double lv;
    if (!parse_number(tok, lv)) parse_fail(name, lineno, "non-numeric label '" + tok + "'");
    labels.push_back(tok);
    const std::size_t row = labels.size() - 1;
    Index last = 0;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) parse_fail(name, lineno, "expected idx:val, got '" + tok + "'");
      long long idx = 0;
      const std::string_view is(tok.data(), colon);
      const auto r = std::from_chars(is.data(), is.data() + is.size(), idx);
      if (r.ec != std::errc() || r.ptr != is.data() + is.size() || idx < 1)
        parse_fail(name, lineno, "bad feature index in '" + tok + "'");
      if (idx <= last) parse_fail(name, lineno, "feature indices must increase");
      double v;
      if (!parse_number(std::string_view(tok).substr(colon + 1), v))
        parse_fail(name, lineno, "non-numeric value in '" + tok + "'");
      last = idx;
      max_index = std::max<Index>(max_index, idx);
      entries.push_back({row, static_cast<Index>(idx - 1), v});
    }
  }
  if (labels.empty()) fail(ErrorKind::ParseError, name + ": empty dataset");
  Index d = max_index;
  if (d_override > 0) {
    if (d_override < max_index)
      fail(ErrorKind::ParseError, name + ": feature index " + std::to_string(max_index) + " exceeds d = " +
                                      std::to_string(d_override));
    d = d_override;
  }
  Dataset ds;
  ds.name = name;
  ds.X = Mat::Zero(static_cast<Index>(labels.size()), d);
  for (const Entry& e : entries) ds.X(static_cast<Index>(e.row), e.col) = e.val;
  assign_labels(ds, labels);
  return ds;
}

Dataset parse_libsvm(const std::filesystem::path& path, Index d_override) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  return parse_libsvm(in, d_override, path.string());
}

void write_libsvm(std::ostream& out, const Dataset& ds) {
  std::string line;
  for (Index i = 0; i < ds.n(); ++i) {
    line = label_text(ds, i);
    for (Index j = 0; j < ds.d(); ++j) {
      if (ds.X(i, j) == 0.0) continue;
      line += ' ';
      line += std::to_string(j + 1);
      line += ':';
      line += format_double(ds.X(i, j));
    }
    line += '\n';
    out << line;
  }
}

// ----------------------------------------------------------------------- csv

namespace {

std::vector<std::vector<std::string>> read_csv_records(std::istream& in, char delim, const std::string& name) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false, after_quote = false;
  std::size_t line = 1;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = after_quote = false;
  };
  auto end_row = [&] {
    if (!(row.empty() && !field_started && field.empty())) {
      end_field();
      rows.push_back(std::move(row));
    }
    row.clear();
  };
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == delim) {
      end_field();
      field_started = true;  // a delimiter implies another field follows
    } else if (c == '\n') {
      end_row();
      ++line;
    } else if (c == '\r') {
      if (in.peek() != '\n') parse_fail(name, line, "bare carriage return");
    } else if (c == '"') {
      if (field_started && !field.empty()) parse_fail(name, line, "quote inside unquoted field");
      if (after_quote) parse_fail(name, line, "text after closing quote");
      quoted = true;
      field_started = true;
    } else {
      if (after_quote) parse_fail(name, line, "text after closing quote");
      field += c;
      field_started = true;
    }
  }
  if (quoted) parse_fail(name, line, "unterminated quoted field");
  end_row();
  return rows;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Dataset parse_csv(std::istream& in, const CsvOptions& opt, const std::string& name) {
  auto rows = read_csv_records(in, opt.delimiter, name);
  std::vector<std::string> header;
  std::size_t first = 0;
  if (opt.header) {
    if (rows.empty()) fail(ErrorKind::ParseError, name + ": empty dataset");
    header = rows[0];
    first = 1;
  }
  if (rows.size() <= first) fail(ErrorKind::ParseError, name + ": empty dataset");
  const std::size_t width = rows[first].size();
  if (header.size() && header.size() != width)
    parse_fail(name, 1, "header has " + std::to_string(header.size()) + " fields, data has " + std::to_string(width));
  if (width < 1) parse_fail(name, first + 1, "no columns");
  long label_col = opt.label_column;
  if (!opt.label_name.empty()) {
    require(opt.header, ErrorKind::ConfigError, "csv: label_name needs a header row");
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](const std::string& h) { return trim(h) == opt.label_name; });
    if (it == header.end()) fail(ErrorKind::ConfigError, name + ": no column named '" + opt.label_name + "'");
    label_col = static_cast<long>(it - header.begin());
  }
  if (label_col < 0) label_col += static_cast<long>(width);
  if (label_col < 0 || label_col >= static_cast<long>(width))
    fail(ErrorKind::ConfigError, name + ": label column out of range");

  Dataset ds;
  ds.name = name;
  ds.X.resize(static_cast<Index>(rows.size() - first), static_cast<Index>(width - 1));
  std::vector<std::string> labels;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width)
      parse_fail(name, r + 1, "expected " + std::to_string(width) + " fields, found " + std::to_string(row.size()));
    Index j = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const std::string f = trim(row[c]);
      if (static_cast<long>(c) == label_col) {
        if (f.empty()) parse_fail(name, r + 1, "empty label");
        labels.push_back(f);
        continue;
      }
      double v;
      if (!parse_number(f, v)) parse_fail(name, r + 1, "non-numeric value '" + f + "'");
      ds.X(static_cast<Index>(r - first), j++) = v;
    }
  }
  assign_labels(ds, labels);
  return ds;
}

Dataset parse_csv(const std::filesystem::path& path, const CsvOptions& opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  return parse_csv(in, opt, path.string());
}

void write_csv(std::ostream& out, const Dataset& ds, bool header) {
  std::string line;
  if (header) {
    line = "label";
    for (Index j = 0; j < ds.d(); ++j) line += ",x" + std::to_string(j + 1);
    out << line << '\n';
  }
  for (Index i = 0; i < ds.n(); ++i) {
    line = csv_quote(label_text(ds, i));
    for (Index j = 0; j < ds.d(); ++j) {
      line += ',';
      line += format_double(ds.X(i, j));
    }
    out << line << '\n';
  }
}

// ----------------------------------------------------------------------- idx

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& name) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail(ErrorKind::ParseError, name + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

Dataset parse_idx(const std::filesystem::path& images, const std::filesystem::path& labels, Index max_rows) {
  std::ifstream fi(images, std::ios::binary), fl(labels, std::ios::binary);
  if (!fi) fail(ErrorKind::IoError, "cannot open " + images.string());
  if (!fl) fail(ErrorKind::IoError, "cannot open " + labels.string());
  if (read_be32(fi, images.string()) != 0x803) fail(ErrorKind::ParseError, images.string() + ": not an IDX image file");
  if (read_be32(fl, labels.string()) != 0x801) fail(ErrorKind::ParseError, labels.string() + ": not an IDX label file");
  const Index n = read_be32(fi, images.string());
  const Index rows = read_be32(fi, images.string());
  const Index cols = read_be32(fi, images.string());
  const Index nl = read_be32(fl, labels.string());
  if (n != nl) fail(ErrorKind::ParseError, "IDX image and label counts differ");
  const Index take = max_rows > 0 ? std::min(n, max_rows) : n;
  if (take == 0) fail(ErrorKind::ParseError, images.string() + ": empty dataset");
  Dataset ds;
  ds.name = images.stem().string();
  ds.X.resize(take, rows * cols);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows * cols));
  std::vector<std::string> raw;
  for (Index i = 0; i < take; ++i) {
    if (!fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      fail(ErrorKind::ParseError, images.string() + ": truncated image data");
    for (Index j = 0; j < rows * cols; ++j) ds.X(i, j) = buf[static_cast<std::size_t>(j)] / 255.0;
    char lab;
    if (!fl.get(lab)) fail(ErrorKind::ParseError, labels.string() + ": truncated label data");
    raw.push_back(std::to_string(static_cast<unsigned char>(lab)));
  }
  assign_labels(ds, raw);
  return ds;
}

}  // namespace rngd

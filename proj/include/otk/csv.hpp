/* otk/csv.hpp
 *
 * RFC-4180 CSV output for feature tables: CRLF record separators, header
 * row, minimal quoting. Floating-point cells use the shortest decimal
 * representation that round-trips, so identical runs produce byte-identical
 * files. Null cells are empty; vector cells join their components with
 * semicolons inside one field.
 */

#ifndef OTK_CSV_HPP
#define OTK_CSV_HPP

#include "otk/feature_table.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace otk {

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

inline std::string csv_escape(const std::string& field) {
  const bool needs_quote = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quote) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_cell(const FeatureTable& t, std::size_t row, int col) {
  switch (t.kind(col)) {
    case FeatureTable::ColKind::Int:
      return std::to_string(t.get_int(row, col));
    case FeatureTable::ColKind::Scalar: {
      const double v = t.get_scalar(row, col);
      return std::isnan(v) ? std::string() : format_double(v);
    }
    case FeatureTable::ColKind::Vector: {
      const VectorCell& c = t.get_vector(row, col);
      std::string out;
      for (int i = 0; i < c.dim; ++i) {
        if (i) out += ';';
        out += format_double(c.v[i]);
      }
      return out;
    }
  }
  return {};
}

inline void write_csv(std::ostream& os, const FeatureTable& t) {
  for (std::size_t c = 0; c < t.columns(); ++c) {
    if (c) os << ',';
    os << csv_escape(t.name(static_cast<int>(c)));
  }
  os << "\r\n";
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.columns(); ++c) {
      if (c) os << ',';
      os << csv_escape(csv_cell(t, r, static_cast<int>(c)));
    }
    os << "\r\n";
  }
}

inline void write_csv_file(const std::string& path, const FeatureTable& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_csv(os, t);
  if (!os) throw std::runtime_error("write failed: " + path);
}

// Concatenate tables with identical schemas (per-frame tables into one file).
inline void write_csv_file(const std::string& path,
                           const std::vector<FeatureTable>& tables) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  bool header_done = false;
  for (const FeatureTable& t : tables) {
    if (!header_done) {
      for (std::size_t c = 0; c < t.columns(); ++c) {
        if (c) os << ',';
        os << csv_escape(t.name(static_cast<int>(c)));
      }
      os << "\r\n";
      header_done = true;
    }
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.columns(); ++c) {
        if (c) os << ',';
        os << csv_escape(csv_cell(t, r, static_cast<int>(c)));
      }
      os << "\r\n";
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

// JSON-lines variant of a table (one object per row), for the multimesh
// single-file export.
inline void write_jsonl_file(const std::string& path, const FeatureTable& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    os << '{';
    for (std::size_t c = 0; c < t.columns(); ++c) {
      if (c) os << ',';
      os << '"' << t.name(static_cast<int>(c)) << "\":";
      switch (t.kind(static_cast<int>(c))) {
        case FeatureTable::ColKind::Int:
          os << t.get_int(r, static_cast<int>(c));
          break;
        case FeatureTable::ColKind::Scalar: {
          const double v = t.get_scalar(r, static_cast<int>(c));
          if (std::isnan(v)) os << "null";
          else os << format_double(v);
          break;
        }
        case FeatureTable::ColKind::Vector: {
          const VectorCell& cell = t.get_vector(r, static_cast<int>(c));
          if (cell.dim == 0) {
            os << "null";
          } else {
            os << '[';
            for (int i = 0; i < cell.dim; ++i) {
              if (i) os << ',';
              os << format_double(cell.v[i]);
            }
            os << ']';
          }
          break;
        }
      }
    }
    os << "}\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace otk

#endif  // OTK_CSV_HPP

#include "operant/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "operant/errors.hpp"

namespace operant::io {

std::string format_double(double v) {
  char buf[40];
  // Round-trip hunting: the shortest of %.15g/%.16g/%.17g that parses back
  // to the same bits.  Keeps files compact without losing exactness.
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (std::memcmp(&back, &v, sizeof(double)) == 0) return buf;
  }
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  out << body;
  if (!out) throw DataError("short write: " + path.string());
}

CsvWriter::CsvWriter(std::filesystem::path path, std::vector<std::string> columns,
                     std::vector<std::string> comment_lines)
    : path_(std::move(path)), ncols_(columns.size()) {
  for (const auto& c : comment_lines) body_ += "# " + c + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    body_ += columns[i];
    body_ += (i + 1 == columns.size()) ? '\n' : ',';
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != ncols_)
    throw ShapeError("csv row has " + std::to_string(cells.size()) +
                     " cells, header has " + std::to_string(ncols_));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    body_ += cells[i];
    body_ += (i + 1 == cells.size()) ? '\n' : ',';
  }
}

void CsvWriter::row_numeric(const std::vector<double>& cells) {
  std::vector<std::string> text;
  text.reserve(cells.size());
  for (double v : cells) text.push_back(format_double(v));
  row(text);
}

void CsvWriter::flush() {
  if (flushed_) return;
  write_text_file(path_, body_);
  flushed_ = true;
}

CsvWriter::~CsvWriter() {
  try {
    flush();
  } catch (...) {
    // Destructors stay silent; call flush() directly to observe failures.
  }
}

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

double CsvTable::number(std::size_t row, int col) const {
  if (col < 0 || row >= rows.size() ||
      static_cast<std::size_t>(col) >= rows[row].size())
    throw DataError("csv cell out of range");
  return std::stod(rows[row][static_cast<std::size_t>(col)]);
}

CsvTable read_csv(const std::filesystem::path& path) {
  CsvTable table;
  std::istringstream in(read_text_file(path));
  std::string line;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!header_done) {
      table.columns = std::move(cells);
      header_done = true;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  if (!header_done) throw DataError("csv file has no header row: " + path.string());
  return table;
}

}  // namespace operant::io

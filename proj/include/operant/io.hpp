#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace operant::io {

// Shortest decimal form that parses back to the identical double ("%.17g"
// trimmed).  All numeric artifact output goes through this so that re-runs of
// a deterministic pipeline reproduce files byte for byte.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& body);

// Column-oriented CSV with optional '#'-prefixed header comments (used to
// embed the resolved experiment config and root seed in every artifact).
class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, std::vector<std::string> columns,
            std::vector<std::string> comment_lines = {});
  void row(const std::vector<std::string>& cells);
  void row_numeric(const std::vector<double>& cells);
  void flush();  // writes the file; also runs on destruction

  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

 private:
  std::filesystem::path path_;
  std::string body_;
  std::size_t ncols_;
  bool flushed_ = false;
};

struct CsvTable {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] int column_index(const std::string& name) const;  // -1 if absent
  [[nodiscard]] double number(std::size_t row, int col) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace operant::io

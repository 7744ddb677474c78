#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "auvlearn/auv_dynamics.hpp"

namespace auvlearn {

void write_dataset(std::ostream& out, const Dataset& data) {
  std::string line;
  for (std::size_t c = 0; c < kDatasetColumns.size(); ++c) {
    if (c) line += ',';
    line += kDatasetColumns[c];
  }
  out << line << '\n';
  for (const auto& r : data) {
    // fmt's default double formatting is the shortest exact round-trip form.
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.t, r.nu[0], r.nu[1], r.nu[2], r.n[0],
                       r.n[1], r.n[2], r.accel[0], r.accel[1], r.accel[2], r.config);
  }
  if (!out) throw std::runtime_error("write_dataset: write failed");
}

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
  write_dataset(out, data);
}

namespace {

double parse_double(std::string_view field, std::size_t line, std::size_t col) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw std::runtime_error(fmt::format("read_dataset: line {}: bad value '{}' in column '{}'", line,
                                         field, kDatasetColumns[col]));
  return v;
}

}  // namespace

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_dataset: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream header(line);
    std::string name;
    std::size_t c = 0;
    while (std::getline(header, name, ',')) {
      if (c >= kDatasetColumns.size())
        throw std::runtime_error("read_dataset: unexpected extra column '" + name + "'");
      if (name != kDatasetColumns[c])
        throw std::runtime_error(fmt::format("read_dataset: bad header column {} '{}' (expected '{}')",
                                             c + 1, name, kDatasetColumns[c]));
      ++c;
    }
    if (c != kDatasetColumns.size())
      throw std::runtime_error(fmt::format("read_dataset: missing column '{}'", kDatasetColumns[c]));
  }

  Dataset rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 11> v{};
    std::size_t col = 0, start = 0;
    while (true) {
      const std::size_t end = line.find(',', start);
      const std::string_view field =
          std::string_view(line).substr(start, end == std::string::npos ? std::string::npos : end - start);
      if (col >= v.size()) throw std::runtime_error(fmt::format("read_dataset: line {}: too many fields", lineno));
      v[col] = parse_double(field, lineno, col);
      ++col;
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (col != v.size()) throw std::runtime_error(fmt::format("read_dataset: line {}: too few fields", lineno));
    DatasetRow r;
    r.t = v[0];
    for (int c = 0; c < 3; ++c) {
      r.nu[c] = v[1 + c];
      r.n[c] = v[4 + c];
      r.accel[c] = v[7 + c];
    }
    r.config = static_cast<int>(v[10]);
    if (static_cast<double>(r.config) != v[10])
      throw std::runtime_error(fmt::format("read_dataset: line {}: config label must be an integer", lineno));
    rows.push_back(r);
  }
  return rows;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
  return read_dataset(in);
}

}  // namespace auvlearn

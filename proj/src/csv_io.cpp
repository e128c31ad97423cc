#include "dqf/csv_io.hpp"

#include "dqf/errors.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

namespace dqf::io {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw DataError(where + ": not a number: '" + s + "'");
  return v;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError("missing column '" + name + "'");
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  return to_double(rows.at(row).at(col), "row " + std::to_string(row + 2));
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(source + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields");
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

std::string fmt(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

XiSeries read_xi(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t cd = t.column("day");
  const std::size_t cols[4] = {t.column("a"), t.column("b_star"), t.column("g"), t.column("h")};
  XiSeries xi;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    xi.day.push_back(t.rows[r][cd]);
    std::array<double, 4> row{};
    for (int i = 0; i < 4; ++i) row[i] = t.number(r, cols[i]);
    xi.xi.push_back(row);
  }
  return xi;
}

std::string xi_csv(const XiSeries& xi) {
  std::string s = "day,a,b_star,g,h\n";
  for (std::size_t t = 0; t < xi.size(); ++t) {
    s += xi.day[t];
    for (double v : xi.xi[t]) s += "," + fmt(v);
    s += "\n";
  }
  return s;
}

std::vector<std::vector<double>> read_day_returns(const std::filesystem::path& path,
                                                  std::vector<std::string>* labels) {
  const CsvTable t = read_csv(path);
  const std::size_t cd = t.column("day_index"), cr = t.column("return");
  std::vector<std::vector<double>> days;
  std::map<std::string, std::size_t> slot;
  std::vector<std::string> order;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& key = t.rows[r][cd];
    auto [it, inserted] = slot.try_emplace(key, days.size());
    if (inserted) {
      days.emplace_back();
      order.push_back(key);
    }
    days[it->second].push_back(t.number(r, cr));
  }
  if (labels) *labels = std::move(order);
  return days;
}

std::string draws_csv(const Eigen::MatrixXd& draws) {
  std::string s;
  const auto& names = DqfTheta::names();
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    if (c) s += ",";
    s += draws.cols() == kThetaDim ? std::string(names[c]) : "x" + std::to_string(c + 1);
  }
  s += "\n";
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < draws.cols(); ++c) {
      if (c) s += ",";
      s += fmt(draws(r, c));
    }
    s += "\n";
  }
  return s;
}

Eigen::MatrixXd read_draws(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  Eigen::MatrixXd m(t.rows.size(), t.header.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.header.size(); ++c) m(r, c) = t.number(r, c);
  }
  return m;
}

}  // namespace dqf::io

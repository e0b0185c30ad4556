#include "io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace infoprio::cli {

namespace fs = std::filesystem;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path.string(), "not valid JSON");
  return doc;
}

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double parse_real(const std::string& cell, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where, "not a number: '" + cell + "'");
  }
}

}  // namespace

PointFile read_point_csv(const fs::path& path, bool labelled) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  PointFile out;
  std::string line;
  int lineno = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const std::size_t first = labelled ? 1 : 0;
    if (cells.size() <= first) throw ConfigError(where, "row has no coordinates");
    if (labelled) out.labels.push_back(static_cast<int>(parse_real(cells[0], where)));
    Vec v(static_cast<Eigen::Index>(cells.size() - first));
    for (std::size_t i = first; i < cells.size(); ++i) v[static_cast<Eigen::Index>(i - first)] = parse_real(cells[i], where);
    if (width >= 0 && v.size() != width) throw ConfigError(where, "row width differs from the first row");
    width = v.size();
    out.rows.push_back(std::move(v));
  }
  return out;
}

std::vector<double> read_reals(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    for (const auto& cell : split_csv(line)) {
      if (cell.find_first_not_of(" \t\r") == std::string::npos) continue;
      out.push_back(parse_real(cell, path.string() + ":" + std::to_string(lineno)));
    }
  }
  return out;
}

void write_manifest(const fs::path& dir, const Manifest& m) {
  const nlohmann::json doc = {
      {"command", m.command},
      {"config", m.config},
      {"config_hash", m.config_hash},
      {"seed", m.seed},
      {"version", INFOPRIO_VERSION},
      {"started", m.started},
      {"finished", m.finished},
      {"outputs", m.outputs},
      {"exit_status", m.exit_status},
  };
  write_atomic(dir / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace infoprio::cli

#include "usmae/data/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "usmae/errors.hpp"

namespace usmae::data {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string_view label_name(Label label) {
  switch (label) {
    case Label::normal: return "normal";
    case Label::mcdk: return "mcdk";
    case Label::utd: return "utd";
  }
  return "?";
}

std::optional<Label> parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "normal") return Label::normal;
  if (lower == "mcdk") return Label::mcdk;
  if (lower == "utd") return Label::utd;
  return std::nullopt;
}

int class_index(Label label, std::size_t num_classes) {
  if (num_classes == 2) return label == Label::normal ? 0 : 1;
  if (num_classes == 3) return static_cast<int>(label);
  throw ConfigError("num_classes must be 2 or 3");
}

std::vector<SampleRecord> load_manifest(const fs::path& csv_path) {
  std::ifstream f(csv_path);
  if (!f) throw IoError("cannot open manifest " + csv_path.string());
  const std::string what = csv_path.string();
  const fs::path base = csv_path.parent_path();
  std::string line;
  if (!std::getline(f, line)) throw ParseError(what + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header != std::vector<std::string>{"path", "label", "group"} &&
      header != std::vector<std::string>{"path", "label"}) {
    throw ParseError(what + ":1: expected header 'path,label,group'");
  }
  std::vector<SampleRecord> records;
  std::map<fs::path, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    const std::string where = what + ":" + std::to_string(line_no);
    if (fields.size() < 2 || fields.size() > 3) {
      throw ParseError(where + ": expected 2 or 3 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(where + ": empty path");
    const auto label = parse_label(fields[1]);
    if (!label) throw ParseError(where + ": unknown label '" + fields[1] + "'");
    SampleRecord r;
    r.path = fs::path(fields[0]).is_absolute() ? fs::path(fields[0]) : base / fields[0];
    r.path = r.path.lexically_normal();
    r.label = *label;
    r.group = fields.size() == 3 ? fields[2] : "";
    r.source = what;
    if (auto it = seen.find(r.path); it != seen.end()) {
      throw ParseError(where + ": duplicate path '" + fields[0] + "' (first seen on line " +
                       std::to_string(it->second) + ")");
    }
    if (!fs::exists(r.path)) throw IoError(where + ": image not found: " + r.path.string());
    seen.emplace(r.path, line_no);
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const fs::path& csv_path, const std::vector<SampleRecord>& records) {
  std::ofstream f(csv_path, std::ios::trunc);
  if (!f) throw IoError("cannot write manifest " + csv_path.string());
  const fs::path base = csv_path.parent_path();
  f << "path,label,group\n";
  for (const auto& r : records) {
    auto rel = base.empty() ? r.path : r.path.lexically_relative(base);
    if (rel.empty() || *rel.begin() == "..") rel = r.path;
    f << rel.generic_string() << ',' << label_name(r.label) << ',' << r.group << '\n';
  }
  if (!f) throw IoError("failed writing manifest " + csv_path.string());
}

}  // namespace usmae::data

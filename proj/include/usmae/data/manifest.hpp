#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace usmae::data {

// Class indices follow the order normal, MCDK, UTD.
enum class Label { normal = 0, mcdk = 1, utd = 2 };

std::string_view label_name(Label label);
// Case-insensitive; nullopt for anything outside the closed set.
std::optional<Label> parse_label(std::string_view text);

// Index used by a classification head: binary heads map every anomaly to 1.
int class_index(Label label, std::size_t num_classes);

struct SampleRecord {
  std::filesystem::path path;  // resolved against the manifest's directory
  Label label = Label::normal;
  std::string group;           // empty when unknown
  std::string source;          // e.g. the manifest file it came from
};

// CSV with header `path,label,group`. Throws IoError for an unreadable file
// or a listed image that does not exist, ParseError (with line number) for
// malformed rows, unknown labels and duplicate paths.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& csv_path);

// Writes paths relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& csv_path, const std::vector<SampleRecord>& records);

}  // namespace usmae::data

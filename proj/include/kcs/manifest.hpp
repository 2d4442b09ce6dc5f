#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kcs {

enum class Label { normal = 0, keratoconus = 1 };
enum class Source { bench, handheld };

std::string to_string(Label label);
std::string to_string(Source source);
Label label_from_string(const std::string& s);
Source source_from_string(const std::string& s);

/// One eye: a heatmap pair plus its quantitative metadata. Image paths are
/// stored relative to the manifest location.
struct SampleRecord {
  std::string id;
  std::string axial_path;
  std::string tangential_path;
  double simk1 = 0.0;
  double simk2 = 0.0;
  std::optional<double> ppk;  // fraction in [0,1]; absent allowed
  Label label = Label::normal;
  Source source = Source::bench;
  std::uint64_t seed = 0;
};

/// Dataset index: the records plus the directory they resolve against.
struct Manifest {
  std::filesystem::path base_dir;
  std::vector<SampleRecord> records;

  std::filesystem::path axial_abs(const SampleRecord& r) const { return base_dir / r.axial_path; }
  std::filesystem::path tangential_abs(const SampleRecord& r) const {
    return base_dir / r.tangential_path;
  }
  const SampleRecord& by_id(const std::string& id) const;
};

/// Tab-separated, one record per line, nine fields:
/// id  axial_path  tangential_path  simk1  simk2  ppk  label  source  seed
/// ppk uses "-" when absent. No header line.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Checks that every image path resolves; throws naming the first missing file.
void validate_manifest(const Manifest& manifest);

}  // namespace kcs

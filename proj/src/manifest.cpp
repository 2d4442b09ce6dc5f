#include "kcs/manifest.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kcs {

std::string to_string(Label label) {
  return label == Label::keratoconus ? "keratoconus" : "normal";
}

std::string to_string(Source source) { return source == Source::bench ? "bench" : "handheld"; }

Label label_from_string(const std::string& s) {
  if (s == "keratoconus") return Label::keratoconus;
  if (s == "normal") return Label::normal;
  throw std::runtime_error("unknown label: '" + s + "'");
}

Source source_from_string(const std::string& s) {
  if (s == "bench") return Source::bench;
  if (s == "handheld") return Source::handheld;
  throw std::runtime_error("unknown source: '" + s + "'");
}

const SampleRecord& Manifest::by_id(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return r;
  throw std::runtime_error("sample id not in manifest: " + id);
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());

  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 9)
      throw std::runtime_error("manifest " + path.string() + " line " + std::to_string(lineno) +
                               ": expected 9 tab-separated fields, got " +
                               std::to_string(fields.size()));
    try {
      SampleRecord r;
      r.id = fields[0];
      r.axial_path = fields[1];
      r.tangential_path = fields[2];
      r.simk1 = std::stod(fields[3]);
      r.simk2 = std::stod(fields[4]);
      if (fields[5] != "-") r.ppk = std::stod(fields[5]);
      r.label = label_from_string(fields[6]);
      r.source = source_from_string(fields[7]);
      r.seed = std::stoull(fields[8]);
      m.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("manifest " + path.string() + " line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no platform newline games
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  for (const auto& r : manifest.records) {
    out << r.id << '\t' << r.axial_path << '\t' << r.tangential_path << '\t'
        << format_double(r.simk1) << '\t' << format_double(r.simk2) << '\t'
        << (r.ppk ? format_double(*r.ppk) : std::string("-")) << '\t' << to_string(r.label) << '\t'
        << to_string(r.source) << '\t' << r.seed << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void validate_manifest(const Manifest& manifest) {
  for (const auto& r : manifest.records) {
    if (!std::filesystem::exists(manifest.axial_abs(r)))
      throw std::runtime_error("sample " + r.id +
                               ": missing axial image " + manifest.axial_abs(r).string());
    if (!std::filesystem::exists(manifest.tangential_abs(r)))
      throw std::runtime_error("sample " + r.id + ": missing tangential image " +
                               manifest.tangential_abs(r).string());
    if (r.simk1 < r.simk2)
      throw std::runtime_error("sample " + r.id + ": simk1 < simk2");
  }
}

}  // namespace kcs

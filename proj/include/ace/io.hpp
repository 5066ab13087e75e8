#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ace/error.hpp"
#include "ace/types.hpp"

namespace ace::io {

namespace fs = std::filesystem;

inline constexpr std::array<char, 4> kEmbMagic = {'E', 'M', 'B', '1'};

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::missing_file, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double parse_double(std::string_view tok, const fs::path& path) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  auto [p, ec] = std::from_chars(first, last, v);
  require(ec == std::errc() && p == last, errc::parse_error,
          path.string() + ": bad numeric field '" + std::string(tok) + "'");
  require(std::isfinite(v), errc::non_finite_value, path.string() + ": non-finite value");
  return v;
}

inline embedding_matrix load_matrix_csv(const fs::path& path) {
  std::string text = read_file(path);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    if (line.empty()) continue;
    std::size_t ncols = 0;
    std::size_t f = 0;
    while (true) {
      std::size_t comma = line.find(',', f);
      std::string_view tok = line.substr(f, comma == std::string_view::npos ? line.size() - f
                                                                            : comma - f);
      values.push_back(parse_double(tok, path));
      ++ncols;
      if (comma == std::string_view::npos) break;
      f = comma + 1;
    }
    if (rows == 0) cols = ncols;
    require(ncols == cols, errc::parse_error,
            path.string() + ": inconsistent column count at row " + std::to_string(rows + 1));
    ++rows;
  }
  require(rows >= 1, errc::parse_error, path.string() + ": empty matrix file");
  return embedding_matrix(rows, cols, std::move(values));
}

inline embedding_matrix load_matrix_binary(const fs::path& path) {
  std::string raw = read_file(path);
  require(raw.size() >= 20 && std::memcmp(raw.data(), kEmbMagic.data(), 4) == 0, errc::parse_error,
          path.string() + ": not an EMB1 file");
  auto read_u64 = [&](std::size_t off) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(raw[off + b]);
    return v;
  };
  std::uint64_t n = read_u64(4);
  std::uint64_t d = read_u64(12);
  require(raw.size() == 20 + n * d * 8, errc::parse_error, path.string() + ": truncated EMB1 file");
  std::vector<double> values(n * d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = read_u64(20 + i * 8);
    double v;
    std::memcpy(&v, &bits, 8);
    values[i] = v;
  }
  return embedding_matrix(n, d, std::move(values));
}

/// Loads either format, sniffing the EMB1 magic bytes.
inline embedding_matrix load_matrix(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::missing_file, "cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  in.close();
  if (in.gcount() == 4 && magic == kEmbMagic) return load_matrix_binary(path);
  return load_matrix_csv(path);
}

inline void save_matrix_csv(const embedding_matrix& z, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::missing_file, "cannot write " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, z(i, j));
      require(ec == std::errc(), errc::parse_error, "double formatting failed");
      if (j) out.put(',');
      out.write(buf, p - buf);
    }
    out.put('\n');
  }
}

inline void save_matrix_binary(const embedding_matrix& z, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::missing_file, "cannot write " + path.string());
  out.write(kEmbMagic.data(), 4);
  auto write_u64 = [&](std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
  };
  write_u64(z.rows());
  write_u64(z.cols());
  for (double v : z.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(bits);
  }
}

/// Label files are CSV with one integer per line.
inline std::vector<long long> load_labels_raw(const fs::path& path) {
  std::string text = read_file(path);
  std::vector<long long> labels;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    if (line.empty()) continue;
    long long v = 0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    require(ec == std::errc() && p == line.data() + line.size(), errc::parse_error,
            path.string() + ": bad label line '" + std::string(line) + "'");
    labels.push_back(v);
  }
  require(!labels.empty(), errc::empty_input, path.string() + ": empty label file");
  return labels;
}

inline partition load_partition(const fs::path& path) {
  return partition::canonicalize(load_labels_raw(path));
}

inline void save_labels(const partition& p, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::missing_file, "cannot write " + path.string());
  for (std::size_t l : p.labels()) out << l << '\n';
}

/// Manifest schema:
///   { "trials": [{"id": str, "embedding": path, "labels": path}, ...],
///     "raw_input": path?, "truth": path? }
/// Relative paths resolve against the manifest's directory.
inline trial_bundle load_bundle(const fs::path& manifest_path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, manifest_path.string() + ": " + e.what());
  }
  require(doc.is_object() && doc.contains("trials") && doc["trials"].is_array(),
          errc::parse_error, manifest_path.string() + ": missing 'trials' array");
  fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  trial_bundle bundle;
  for (const auto& t : doc["trials"]) {
    require(t.is_object() && t.contains("id") && t.contains("embedding") && t.contains("labels"),
            errc::parse_error, manifest_path.string() + ": trial entry needs id/embedding/labels");
    std::string id = t["id"].get<std::string>();
    embedding_matrix z = load_matrix(resolve(t["embedding"].get<std::string>()));
    partition rho = load_partition(resolve(t["labels"].get<std::string>()));
    bundle.trials.emplace_back(std::move(id), std::move(z), std::move(rho));
  }
  if (doc.contains("raw_input") && !doc["raw_input"].is_null())
    bundle.raw_input = load_matrix(resolve(doc["raw_input"].get<std::string>()));
  if (doc.contains("truth") && !doc["truth"].is_null())
    bundle.truth = load_partition(resolve(doc["truth"].get<std::string>()));
  bundle.validate();
  return bundle;
}

/// Writes a bundle directory: manifest.json plus one embedding/label file per
/// trial, in the formats load_bundle reads back.
inline void save_bundle(const trial_bundle& bundle, const fs::path& dir, bool binary = true) {
  fs::create_directories(dir);
  nlohmann::json doc;
  doc["trials"] = nlohmann::json::array();
  for (const auto& t : bundle.trials) {
    std::string emb_name = t.id + (binary ? ".emb" : ".csv");
    std::string lab_name = t.id + ".labels.csv";
    if (binary)
      save_matrix_binary(t.embedding, dir / emb_name);
    else
      save_matrix_csv(t.embedding, dir / emb_name);
    save_labels(t.labels, dir / lab_name);
    doc["trials"].push_back({{"id", t.id}, {"embedding", emb_name}, {"labels", lab_name}});
  }
  if (bundle.raw_input) {
    if (binary)
      save_matrix_binary(*bundle.raw_input, dir / "raw_input.emb");
    else
      save_matrix_csv(*bundle.raw_input, dir / "raw_input.csv");
    doc["raw_input"] = binary ? "raw_input.emb" : "raw_input.csv";
  }
  if (bundle.truth) {
    save_labels(*bundle.truth, dir / "truth.labels.csv");
    doc["truth"] = "truth.labels.csv";
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  require(out.good(), errc::missing_file, "cannot write manifest in " + dir.string());
  out << doc.dump(2) << '\n';
}

}  // namespace ace::io

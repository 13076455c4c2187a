#pragma once

#include "gsprep/encoder.hpp"
#include "gsprep/mps.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gsprep {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kBitConvention = "site1-msb";

// All numeric text output uses %.17g so doubles round-trip exactly and
// repeated runs are byte-identical.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

/// FNV-1a 64-bit content hash (integrity bookkeeping, not cryptographic).
inline std::string checksum(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string checksum_file(const fs::path& path) { return checksum(read_file(path)); }

// ---------------------------------------------------------------------------
// flat key = value configuration text

/// Flat-key configuration: one `key = value` per line, `#` comments. Values
/// keep their literal text so serialize(parse(x)) is lossless.
class Config {
 public:
  static Config parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config load(const fs::path& path) { return parse(read_file(path)); }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error("config key '" + key + "': expected a number, got '" + it->second + "'");
    }
  }

  long get_int(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error("config key '" + key + "': expected an integer, got '" + it->second + "'");
    }
  }

  std::vector<std::string> get_list(const std::string& key,
                                    const std::string& fallback) const {
    const std::string raw = get_string(key, fallback);
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(raw);
    while (std::getline(in, item, ',')) {
      const auto a = item.find_first_not_of(" \t");
      const auto b = item.find_last_not_of(" \t");
      if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    if (out.empty()) throw Error("config key '" + key + "': empty list");
    return out;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;  // sorted, so serialization is stable
};

// ---------------------------------------------------------------------------
// CSV writing

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (size_t i = 0; i < columns_.size(); ++i) {
      if (i) text_ += ",";
      text_ += columns_[i];
    }
    text_ += "\n";
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw Error("CsvWriter: column count mismatch");
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ",";
      text_ += cells[i];
    }
    text_ += "\n";
  }

  const std::string& text() const { return text_; }

 private:
  std::vector<std::string> columns_;
  std::string text_;
};

/// Minimal CSV reader for the library's own outputs (no quoting).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  static CsvTable load(const fs::path& path) {
    CsvTable t;
    std::istringstream in(read_file(path));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (first) {
        t.columns = cells;
        first = false;
      } else {
        t.rows.push_back(cells);
      }
    }
    return t;
  }

  int column(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw Error("CSV column not found: " + name);
  }

  std::vector<double> numeric(const std::string& name) const {
    const int c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(std::stod(r.at(c)));
    return out;
  }
};

// ---------------------------------------------------------------------------
// MPS and layer-stack containers (versioned text)

inline void save_mps(const fs::path& path, const Mps& mps, std::uint64_t seed) {
  std::ostringstream out;
  out << "GSPREP-MPS v1\n";
  out << "n_sites " << mps.n_sites() << "\n";
  out << "bit_convention " << kBitConvention << "\n";
  out << "canonical " << (mps.canonical_form() == CanonicalForm::left ? "left" : "other")
      << "\n";
  out << "seed " << seed << "\n";
  out << "bond_dims";
  for (Index d : mps.bond_dims()) out << " " << d;
  out << "\n";
  for (int site = 1; site <= mps.n_sites(); ++site) {
    const SiteTensor& t = mps.tensor(site);
    out << "site " << site << " dims " << t.left_dim() << " " << t.right_dim() << "\n";
    for (int s = 0; s < 2; ++s)
      for (Index a = 0; a < t.left_dim(); ++a)
        for (Index b = 0; b < t.right_dim(); ++b)
          out << fmt_double(t.block[s](a, b).real()) << " "
              << fmt_double(t.block[s](a, b).imag()) << "\n";
  }
  out << "end\n";
  write_file(path, out.str());
}

inline Mps load_mps(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string token;
  in >> token;
  if (token != "GSPREP-MPS") throw Error(path.string() + ": not an MPS container");
  in >> token;
  if (token != "v1") throw Error(path.string() + ": unsupported MPS container version");
  int n = 0;
  std::string canonical, convention;
  std::uint64_t seed = 0;
  in >> token >> n;                // n_sites
  in >> token >> convention;       // bit_convention
  if (convention != kBitConvention)
    throw Error(path.string() + ": unexpected bit convention " + convention);
  in >> token >> canonical;        // canonical
  in >> token >> seed;             // seed
  in >> token;                     // bond_dims
  std::vector<Index> dims(n + 1);
  for (auto& d : dims) in >> d;
  std::vector<SiteTensor> tensors;
  for (int site = 1; site <= n; ++site) {
    Index dl = 0, dr = 0;
    in >> token;  // site
    int idx = 0;
    in >> idx >> token >> dl >> dr;
    SiteTensor t = SiteTensor::zero(dl, dr);
    for (int s = 0; s < 2; ++s)
      for (Index a = 0; a < dl; ++a)
        for (Index b = 0; b < dr; ++b) {
          double re = 0, im = 0;
          in >> re >> im;
          t.block[s](a, b) = Complex(re, im);
        }
    tensors.push_back(std::move(t));
  }
  return Mps(std::move(tensors),
             canonical == "left" ? CanonicalForm::left : CanonicalForm::none,
             canonical == "left" ? 1 : -1);
}

inline void save_layers(const fs::path& path, const std::vector<MpdLayer>& layers) {
  if (layers.empty()) throw Error("save_layers: no layers");
  std::ostringstream out;
  out << "GSPREP-LAYERS v1\n";
  out << "n_sites " << layers.front().n_sites << "\n";
  out << "n_layers " << layers.size() << "\n";
  out << "bit_convention " << kBitConvention << "\n";
  for (size_t k = 0; k < layers.size(); ++k) {
    out << "layer " << (k + 1) << "\n";
    for (size_t g = 0; g < layers[k].gates.size(); ++g) {
      const DenseMatrix& m = layers[k].gates[g];
      out << "gate " << (g + 1) << " dim " << m.rows() << "\n";
      for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
          out << fmt_double(m(i, j).real()) << " " << fmt_double(m(i, j).imag()) << "\n";
    }
  }
  out << "end\n";
  write_file(path, out.str());
}

inline std::vector<MpdLayer> load_layers(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string token;
  in >> token;
  if (token != "GSPREP-LAYERS") throw Error(path.string() + ": not a layer container");
  in >> token;
  if (token != "v1") throw Error(path.string() + ": unsupported layer container version");
  int n = 0;
  size_t n_layers = 0;
  std::string convention;
  in >> token >> n;
  in >> token >> n_layers;
  in >> token >> convention;
  std::vector<MpdLayer> layers;
  for (size_t k = 0; k < n_layers; ++k) {
    in >> token;  // layer
    size_t idx;
    in >> idx;
    MpdLayer layer;
    layer.n_sites = n;
    for (int g = 0; g < n; ++g) {
      Index dim = 0;
      size_t gi;
      in >> token >> gi >> token >> dim;  // gate <gi> dim <dim>
      DenseMatrix m(dim, dim);
      for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) {
          double re = 0, im = 0;
          in >> re >> im;
          m(i, j) = Complex(re, im);
        }
      layer.gates.push_back(std::move(m));
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace gsprep

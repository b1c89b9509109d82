#include "wsol/models.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace wsol {

std::string Architecture::id() const {
  std::ostringstream os;
  os << "convnet-w";
  for (std::size_t i = 0; i < trunk.widths.size(); ++i) os << (i ? "-" : "") << trunk.widths[i];
  os << "-p" << trunk.pooled_stages << "-in" << input_size;
  return os.str();
}

void Checkpoint::put(const std::string& prefix, const ParameterSet<float>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) arrays.emplace_back(prefix + "/" + params.name(i), params[i]);
}

void Checkpoint::take(const std::string& prefix, ParameterSet<float>& params) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string key = prefix + "/" + params.name(i);
    bool found = false;
    for (const auto& [name, value] : arrays) {
      if (name != key) continue;
      if (value.rows() != params[i].rows() || value.cols() != params[i].cols())
        throw LoadError("checkpoint: shape mismatch for " + key);
      params[i] = value;
      found = true;
      break;
    }
    if (!found) throw LoadError("checkpoint: missing array " + key);
  }
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
  for (const auto& entry : arrays)
    if (entry.first.rfind(prefix + "/", 0) == 0) return true;
  return false;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw LoadError("checkpoint: missing metadata key " + key);
  return it->second;
}

namespace {
constexpr const char* kMagic = "WSOLCKPT 1";

static_assert(sizeof(float) == 4);
}  // namespace

// Layout:
//   WSOLCKPT 1\n
//   meta <n>\n  then n lines "key=value"
//   arrays <m>\n then per array "name rows cols\n" + rows*cols float32
//   (column-major, little-endian host order) + "\n"
void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os << kMagic << '\n';
  os << "meta " << ckpt.metadata.size() << '\n';
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw InputError("checkpoint: metadata keys/values must be single-line and keys must not contain '='");
    os << k << '=' << v << '\n';
  }
  os << "arrays " << ckpt.arrays.size() << '\n';
  for (const auto& [name, value] : ckpt.arrays) {
    os << name << ' ' << value.rows() << ' ' << value.cols() << '\n';
    os.write(reinterpret_cast<const char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(float)));
    os << '\n';
  }
  if (!os) throw LoadError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  Checkpoint ckpt;
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw LoadError("checkpoint: bad magic");
  std::size_t n = 0;
  if (!std::getline(is, line) || std::sscanf(line.c_str(), "meta %zu", &n) != 1)
    throw LoadError("checkpoint: malformed metadata header");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw LoadError("checkpoint: truncated metadata");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw LoadError("checkpoint: malformed metadata line: " + line);
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!std::getline(is, line) || std::sscanf(line.c_str(), "arrays %zu", &n) != 1)
    throw LoadError("checkpoint: malformed array header");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw LoadError("checkpoint: truncated array table");
    std::istringstream hdr(line);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(hdr >> name >> rows >> cols) || rows < 0 || cols < 0)
      throw LoadError("checkpoint: malformed array header: " + line);
    Mat<float> value(rows, cols);
    is.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(float)));
    if (is.get() != '\n' || !is) throw LoadError("checkpoint: truncated array " + name);
    ckpt.arrays.emplace_back(std::move(name), std::move(value));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("checkpoint: cannot open " + path + " for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("checkpoint: cannot open " + path);
  return read_checkpoint(is);
}

}  // namespace wsol

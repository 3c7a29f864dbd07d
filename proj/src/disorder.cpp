#include "ktlab/disorder.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ktlab {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Two independent 64-bit words per (seed, counter).
std::uint64_t draw(std::uint64_t seed, std::uint64_t counter, std::uint64_t lane) {
  return splitmix64(splitmix64(seed ^ 0x6a09e667f3bcc909ULL) + 2 * counter + lane);
}

double unit_open_closed(std::uint64_t x) {
  // (0, 1]
  return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed " + what + ": '" + s + "'");
  }
}

long long parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::runtime_error("malformed " + what + ": '" + s + "'");
  }
  return v;
}

}  // namespace

std::string to_string(Distribution dist) {
  switch (dist) {
    case Distribution::Gaussian: return "gaussian";
    case Distribution::Uniform: return "uniform";
    case Distribution::Constant: return "constant";
  }
  return "unknown";
}

Distribution parse_distribution(std::string_view name) {
  if (name == "gaussian") return Distribution::Gaussian;
  if (name == "uniform") return Distribution::Uniform;
  if (name == "constant") return Distribution::Constant;
  throw std::invalid_argument("unknown distribution '" + std::string(name) + "'");
}

double coupling_value(std::uint64_t seed, std::uint64_t bond_index,
                      Distribution dist, double J0, double J) {
  switch (dist) {
    case Distribution::Constant:
      return J0;
    case Distribution::Uniform: {
      // Width chosen so the variance is J^2.
      double u = unit_open_closed(draw(seed, bond_index, 0));
      return J0 + J * std::sqrt(3.0) * (2.0 * u - 1.0);
    }
    case Distribution::Gaussian: {
      double u1 = unit_open_closed(draw(seed, bond_index, 0));
      double u2 = unit_open_closed(draw(seed, bond_index, 1));
      return J0 + J * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * std::numbers::pi * u2);
    }
  }
  throw std::logic_error("unhandled distribution");
}

DisorderSample sample_disorder(const Lattice& lat, std::uint64_t seed,
                               Distribution dist, double J0, double J) {
  if (!(J > 0.0)) throw std::invalid_argument("coupling spread J must be > 0");
  DisorderSample dis;
  dis.seed = seed;
  dis.distribution = dist;
  dis.J0 = J0;
  dis.J = J;
  dis.dim = lat.dim();
  dis.size = lat.size();
  dis.values.resize(lat.num_bonds());
  for (int b = 0; b < lat.num_bonds(); ++b) {
    dis.values[b] = coupling_value(seed, static_cast<std::uint64_t>(b), dist, J0, J);
  }
  return dis;
}

DisorderSample make_disorder(const Lattice& lat, std::vector<double> values) {
  if (static_cast<int>(values.size()) != lat.num_bonds()) {
    throw std::invalid_argument("fixture has " + std::to_string(values.size()) +
                                " couplings, lattice has " +
                                std::to_string(lat.num_bonds()) + " bonds");
  }
  DisorderSample dis;
  dis.distribution = Distribution::Constant;
  dis.dim = lat.dim();
  dis.size = lat.size();
  dis.values = std::move(values);
  return dis;
}

void write_sample(std::ostream& os, const Lattice& lat, const DisorderSample& dis) {
  os << "# ktlab disorder sample\n";
  os << "schema_version = " << kDisorderSchemaVersion << '\n';
  os << "d = " << dis.dim << '\n';
  os << "L = " << dis.size << '\n';
  os << "seed = " << dis.seed << '\n';
  os << "distribution = " << to_string(dis.distribution) << '\n';
  os << std::setprecision(17);
  os << "J0 = " << dis.J0 << '\n';
  os << "J = " << dis.J << '\n';
  os << "bonds = " << dis.values.size() << '\n';
  os << "# bond_index, site_i, site_j, J_b\n";
  for (int b = 0; b < static_cast<int>(dis.values.size()); ++b) {
    os << b << ", " << lat.bond(b).i << ", " << lat.bond(b).j << ", "
       << dis.values[b] << '\n';
  }
}

void save_sample(const std::filesystem::path& path, const Lattice& lat,
                 const DisorderSample& dis) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_sample(os, lat, dis);
  if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

DisorderSample read_sample(std::istream& is, const Lattice& lat) {
  std::map<std::string, std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (auto eq = t.find('='); eq != std::string::npos) {
      if (!rows.empty()) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": header entry after data rows");
      }
      header[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 4) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected 4 comma-separated fields");
    }
    rows.push_back(std::move(fields));
  }

  auto require = [&](const std::string& key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) throw std::runtime_error("missing header key '" + key + "'");
    return it->second;
  };
  if (parse_int(require("schema_version"), "schema_version") != kDisorderSchemaVersion) {
    throw std::runtime_error("unsupported schema_version " + require("schema_version"));
  }
  DisorderSample dis;
  dis.dim = static_cast<int>(parse_int(require("d"), "d"));
  dis.size = static_cast<int>(parse_int(require("L"), "L"));
  if (dis.dim != lat.dim() || dis.size != lat.size()) {
    throw std::runtime_error("lattice shape mismatch: file has d=" +
                             std::to_string(dis.dim) + " L=" + std::to_string(dis.size) +
                             ", expected d=" + std::to_string(lat.dim()) +
                             " L=" + std::to_string(lat.size()));
  }
  {
    const std::string& s = require("seed");
    std::uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw std::runtime_error("malformed seed: '" + s + "'");
    }
    dis.seed = seed;
  }
  try {
    dis.distribution = parse_distribution(require("distribution"));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
  dis.J0 = parse_double(require("J0"), "J0");
  dis.J = parse_double(require("J"), "J");
  long long n_bonds = parse_int(require("bonds"), "bonds");
  if (n_bonds != lat.num_bonds() || static_cast<long long>(rows.size()) != n_bonds) {
    throw std::runtime_error("lattice shape mismatch: expected " +
                             std::to_string(lat.num_bonds()) + " bonds, header says " +
                             std::to_string(n_bonds) + ", file has " +
                             std::to_string(rows.size()) + " rows");
  }
  dis.values.assign(n_bonds, 0.0);
  std::vector<bool> seen(n_bonds, false);
  for (const auto& row : rows) {
    long long b = parse_int(row[0], "bond index");
    if (b < 0 || b >= n_bonds || seen[b]) {
      throw std::runtime_error("bad or duplicate bond index " + row[0]);
    }
    long long i = parse_int(row[1], "site index");
    long long j = parse_int(row[2], "site index");
    if (i != lat.bond(static_cast<int>(b)).i || j != lat.bond(static_cast<int>(b)).j) {
      throw std::runtime_error("lattice shape mismatch: bond " + row[0] +
                               " endpoints differ");
    }
    seen[b] = true;
    dis.values[b] = parse_double(row[3], "coupling");
  }
  return dis;
}

DisorderSample load_sample(const std::filesystem::path& path, const Lattice& lat) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_sample(is, lat);
}

}  // namespace ktlab

#include "core/field_io.hpp"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mfg {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'G', 'F'};
constexpr std::uint16_t kVersion = 1;

void append_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

void append_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& b, double x) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Cursor {
  const std::string& b;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    require(pos + n <= b.size(), errc::io_failure, "field file truncated");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint8_t>(b[pos]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(b[pos + i])) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
};

std::string encode_field(const Grid& g, int slabs, const double* data) {
  std::string b;
  b.reserve(64 + static_cast<std::size_t>(g.n_space) * slabs * 8);
  b.append(kMagic, 4);
  append_u16(b, kVersion);
  b.push_back(static_cast<char>(g.dim()));
  for (int a = 0; a < g.dim(); ++a) append_u32(b, static_cast<std::uint32_t>(g.nx(a)));
  for (int a = 0; a < g.dim(); ++a) {
    append_f64(b, g.spec.lo[a]);
    append_f64(b, g.spec.hi[a]);
  }
  append_u32(b, static_cast<std::uint32_t>(slabs == 1 && g.spec.nt == 0 ? 0 : slabs));
  const std::int64_t n = g.n_space * slabs;
  for (std::int64_t k = 0; k < n; ++k) append_f64(b, data[k]);
  return b;
}

}  // namespace

void write_field(const std::string& path, const ScalarField& f) {
  Grid g = f.grid;
  g.spec.nt = 0;  // a scalar snapshot forgets the time grid it came from
  atomic_write_bytes(path, encode_field(g, 1, f.data.data()));
}

void write_field(const std::string& path, const SpaceTimeField& f) {
  atomic_write_bytes(path, encode_field(f.grid, f.grid.levels, f.data.data()));
}

LoadedField read_field(const std::string& path) {
  const std::string b = read_file_bytes(path);
  Cursor c{b};
  c.need(7);
  require(std::memcmp(b.data(), kMagic, 4) == 0, errc::io_failure,
          path + ": bad field magic");
  c.pos = 4;
  const std::uint16_t ver = c.u16();
  require(ver == kVersion, errc::io_failure, path + ": unsupported field version");
  const int dim = static_cast<std::uint8_t>(b[c.pos++]);
  require(dim >= 1 && dim <= 3, errc::io_failure, path + ": bad dim");
  LoadedField out;
  out.spec.dim = dim;
  std::int64_t n_space = 1;
  for (int a = 0; a < dim; ++a) {
    out.spec.nx[a] = static_cast<int>(c.u32());
    n_space *= out.spec.nx[a];
  }
  for (int a = 0; a < dim; ++a) {
    out.spec.lo[a] = c.f64();
    out.spec.hi[a] = c.f64();
  }
  const std::uint32_t nt_slabs = c.u32();
  out.spacetime = nt_slabs > 0;
  out.spec.nt = out.spacetime ? static_cast<int>(nt_slabs) - 1 : 0;
  const std::int64_t total = n_space * (out.spacetime ? nt_slabs : 1);
  out.data.resize(static_cast<std::size_t>(total));
  for (std::int64_t k = 0; k < total; ++k) out.data[static_cast<std::size_t>(k)] = c.f64();
  require(c.pos == b.size(), errc::io_failure, path + ": trailing bytes");
  return out;
}

ScalarField read_scalar_field(const std::string& path) {
  LoadedField lf = read_field(path);
  require(!lf.spacetime, errc::io_failure, path + ": expected a spatial field");
  ScalarField f;
  f.grid = build_grid(lf.spec);
  f.data = std::move(lf.data);
  return f;
}

SpaceTimeField read_spacetime_field(const std::string& path, double horizon) {
  LoadedField lf = read_field(path);
  require(lf.spacetime, errc::io_failure, path + ": expected a space-time field");
  lf.spec.horizon = horizon;
  SpaceTimeField f;
  f.grid = build_grid(lf.spec);
  f.data = std::move(lf.data);
  require(f.data.size() == static_cast<std::size_t>(f.grid.n_space) * f.grid.levels,
          errc::io_failure, path + ": payload size mismatch");
  return f;
}

std::string complex_field_path(const std::string& base, bool imag) {
  return base + (imag ? "_im.mfgf" : "_re.mfgf");
}

void write_trace_csv(const std::string& path, const BoundaryTrace& t) {
  const Grid& g = t.grid;
  std::ostringstream os;
  os << "face";
  for (int a = 1; a < g.dim(); ++a) os << ",idx" << a;
  os << ",t,value,normal_derivative\n";
  char buf[96];
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (int j = 0; j < t.levels; ++j) {
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        os << f;
        const auto multi = face_node_multi(g, f, fi);
        for (int a = 0; a < g.dim(); ++a)
          if (a != face_axis(f)) os << ',' << multi[a];
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g", g.time(j), t.val(f, fi, j),
                      t.nder(f, fi, j));
        os << buf << '\n';
      }
    }
  }
  atomic_write_bytes(path, os.str());
}

BoundaryTrace read_trace_csv(const std::string& path, const Grid& g) {
  std::ifstream in(path);
  require(in.good(), errc::io_failure, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), errc::io_failure, path + ": empty trace file");
  // Parse everything first; the level count falls out of the row count.
  struct Row {
    int face;
    std::array<int, 3> tang;
    double time, value, nder;
  };
  std::vector<Row> parsed;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row r{};
    std::size_t pos = 0;
    auto next = [&]() {
      std::size_t comma = line.find(',', pos);
      std::string tok = line.substr(pos, comma == std::string::npos ? comma : comma - pos);
      pos = comma == std::string::npos ? line.size() : comma + 1;
      return tok;
    };
    r.face = std::stoi(next());
    int slot = 0;
    for (int a = 1; a < g.dim(); ++a) r.tang[slot++] = std::stoi(next());
    r.time = std::stod(next());
    r.value = std::stod(next());
    r.nder = std::stod(next());
    parsed.push_back(r);
  }
  std::int64_t total_face_nodes = 0;
  for (int f = 0; f < 2 * g.dim(); ++f) total_face_nodes += face_node_count(g, f);
  require(total_face_nodes > 0 && parsed.size() % total_face_nodes == 0, errc::io_failure,
          path + ": row count does not match the grid");
  const int levels = static_cast<int>(parsed.size() / total_face_nodes);
  BoundaryTrace t = make_boundary_trace(g, levels);
  std::size_t row = 0;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (int j = 0; j < levels; ++j)
      for (std::int64_t fi = 0; fi < nf; ++fi, ++row) {
        require(parsed[row].face == f, errc::io_failure, path + ": unexpected face order");
        t.val(f, fi, j) = parsed[row].value;
        t.nder(f, fi, j) = parsed[row].nder;
      }
  }
  return t;
}

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  static std::atomic<std::uint64_t> counter{0};
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp" + std::to_string(::getpid()) + "." +
                        std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), errc::io_failure, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), errc::io_failure, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  require(!ec, errc::io_failure, "rename failed for " + path + ": " + ec.message());
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::io_failure, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace mfg

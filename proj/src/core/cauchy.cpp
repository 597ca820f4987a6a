#include "core/cauchy.hpp"

#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <utility>

#include "core/field_io.hpp"
#include "json.hpp"

namespace mfg {

namespace {

bool same_spec(const GridSpec& a, const GridSpec& b) {
  if (a.dim != b.dim || a.nt != b.nt || a.horizon != b.horizon) return false;
  for (int i = 0; i < 3; ++i)
    if (a.lo[i] != b.lo[i] || a.hi[i] != b.hi[i] || a.nx[i] != b.nx[i]) return false;
  return true;
}

// Field files only carry the live axes, so compare just those.
bool spatial_match(const GridSpec& a, const GridSpec& b) {
  if (a.dim != b.dim) return false;
  for (int ax = 0; ax < a.dim; ++ax)
    if (a.lo[ax] != b.lo[ax] || a.hi[ax] != b.hi[ax] || a.nx[ax] != b.nx[ax])
      return false;
  return true;
}

}  // namespace

// ---- extraction ----

MeasurementC1 extract_c1(const SpaceTimeField& v, const SpaceTimeField& m,
                         const MFGCoefficients& co) {
  const Grid& g = v.grid;
  check_same_grid(g, m.grid, "extract_c1");
  check_same_grid(g, co.sigma.grid, "extract_c1");
  check_same_grid(g, co.kappa.grid, "extract_c1");
  MeasurementC1 out;
  out.grid = g;
  out.v_start = slice(v, 0);
  out.m_start = slice(m, 0);
  out.v_end = slice(v, g.levels - 1);
  out.m_end = slice(m, g.levels - 1);
  out.v = restrict_to_boundary(v);
  out.m = restrict_to_boundary(m);

  // The observable density flux carries sigma inside the derivative, so pair
  // the fields first and trace the product.
  SpaceTimeField sm = make_spacetime(g);
  for (std::size_t i = 0; i < sm.data.size(); ++i)
    sm.data[i] = co.sigma.data[i] * m.data[i];
  BoundaryTrace smt = restrict_to_boundary(sm);
  for (int f = 0; f < 2 * g.dim(); ++f)
    out.m.normal_deriv[f] = std::move(smt.normal_deriv[f]);

  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    out.hamiltonian_flux[f].resize(static_cast<std::size_t>(nf) * g.levels);
    for (int j = 0; j < g.levels; ++j)
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        const std::int64_t k = g.index(face_node_multi(g, f, fi));
        out.hamiltonian_flux[f][static_cast<std::size_t>(j * nf + fi)] =
            co.kappa.at(j, k) * out.v.nder(f, fi, j);
      }
  }
  return out;
}

MeasurementC2 extract_c2(const ScalarField& m) {
  const Grid& g = m.grid;
  MeasurementC2 out;
  out.grid = g;
  out.m = restrict_to_boundary(m);
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const int a = face_axis(f);
    const std::int64_t nf = face_node_count(g, f);
    out.flux_diff[f].resize(static_cast<std::size_t>(nf));
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      const auto mi = face_node_multi(g, f, fi);
      auto inner = mi;
      inner[a] = face_side(f) == 0 ? 1 : g.nx(a) - 2;
      out.flux_diff[f][static_cast<std::size_t>(fi)] =
          (m.data[g.index(mi)] - m.data[g.index(inner)]) / g.h[a];
    }
  }
  return out;
}

MeasurementC3 extract_c3(const SpaceTimeField& v, const SpaceTimeField& m,
                         const std::string& tag, int order) {
  check_same_grid(v.grid, m.grid, "extract_c3");
  require(order >= 1, errc::invalid_argument, "extract_c3: order must be positive");
  MeasurementC3 out;
  out.grid = v.grid;
  out.tag = tag;
  out.order = order;
  out.v = restrict_to_boundary(v);
  out.m = restrict_to_boundary(m);
  return out;
}

bool c2_identical(const MeasurementC2& a, const MeasurementC2& b) {
  if (!same_spec(a.grid.spec, b.grid.spec) || a.m.levels != b.m.levels) return false;
  for (int f = 0; f < 6; ++f) {
    if (a.m.value[f] != b.m.value[f]) return false;
    if (a.m.normal_deriv[f] != b.m.normal_deriv[f]) return false;
    if (a.flux_diff[f] != b.flux_diff[f]) return false;
  }
  return true;
}

// ---- energy bookkeeping ----

double energy_integral_from_boundary(const MeasurementC1& c1,
                                     const MFGCoefficients& co) {
  const Grid& g = c1.grid;
  check_same_grid(g, co.sigma.grid, "energy_integral_from_boundary");
  require(g.levels >= 2, errc::invalid_argument,
          "energy_integral_from_boundary: record carries no time extent");
  require(c1.v.levels == g.levels && c1.m.levels == g.levels, errc::invalid_argument,
          "energy_integral_from_boundary: trace levels do not match the grid");
  const auto n_sp = static_cast<std::size_t>(g.n_space);
  require(c1.v_start.data.size() == n_sp && c1.m_start.data.size() == n_sp &&
              c1.v_end.data.size() == n_sp && c1.m_end.data.size() == n_sp,
          errc::invalid_argument, "energy_integral_from_boundary: census slices missing");
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::size_t want = static_cast<std::size_t>(face_node_count(g, f)) * g.levels;
    require(c1.v.value[f].size() == want && c1.v.normal_deriv[f].size() == want &&
                c1.m.value[f].size() == want && c1.m.normal_deriv[f].size() == want &&
                c1.hamiltonian_flux[f].size() == want,
            errc::invalid_argument,
            "energy_integral_from_boundary: trace streams missing");
  }

  double census = 0.0;
  for (std::int64_t k = 0; k < g.n_space; ++k)
    census += g.node_weight(g.unindex(k)) *
              (c1.v_start[k] * c1.m_start[k] - c1.v_end[k] * c1.m_end[k]);

  const double lateral = integrate_boundary_time(g, [&](int f, std::int64_t fi, int j) {
    const std::int64_t k = g.index(face_node_multi(g, f, fi));
    const std::size_t slot = static_cast<std::size_t>(j * face_node_count(g, f) + fi);
    const double vv = c1.v.val(f, fi, j);
    const double mv = c1.m.val(f, fi, j);
    return -co.sigma.at(j, k) * mv * c1.v.nder(f, fi, j) + vv * c1.m.nder(f, fi, j) +
           vv * mv * c1.hamiltonian_flux[f][slot];
  });
  return census + lateral;
}

double recover_power_coefficient(const MeasurementC1& c1, const MFGCoefficients& co,
                                 int k, double c) {
  require(k >= 0, errc::invalid_argument, "recover_power_coefficient: negative power");
  require(c > 0.0, errc::invalid_argument,
          "recover_power_coefficient: census level must be positive");
  const double T = c1.grid.spec.horizon;
  require(T > 0.0, errc::invalid_argument,
          "recover_power_coefficient: record has an empty horizon");
  // Repeated multiplication keeps the small closed-form cases exact.
  double ck1 = c;
  for (int p = 0; p < k; ++p) ck1 *= c;
  return energy_integral_from_boundary(c1, co) / (ck1 * T * c1.grid.volume());
}

// ---- noise knob ----

namespace {

void perturb_stream(std::vector<double>& s, std::mt19937_64& rng,
                    std::normal_distribution<double>& pull) {
  for (double& x : s) x += pull(rng);
}

}  // namespace

void add_trace_noise(MeasurementC1& c1, double stddev, std::uint64_t seed) {
  require(stddev >= 0.0, errc::invalid_argument, "add_trace_noise: negative stddev");
  if (stddev == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> pull(0.0, stddev);
  const int faces = 2 * c1.grid.dim();
  for (int f = 0; f < faces; ++f) perturb_stream(c1.v.value[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c1.v.normal_deriv[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c1.m.value[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c1.m.normal_deriv[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c1.hamiltonian_flux[f], rng, pull);
}

void add_trace_noise(MeasurementC2& c2, double stddev, std::uint64_t seed) {
  require(stddev >= 0.0, errc::invalid_argument, "add_trace_noise: negative stddev");
  if (stddev == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> pull(0.0, stddev);
  const int faces = 2 * c2.grid.dim();
  for (int f = 0; f < faces; ++f) perturb_stream(c2.m.value[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c2.m.normal_deriv[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c2.flux_diff[f], rng, pull);
}

void add_trace_noise(MeasurementC3& c3, double stddev, std::uint64_t seed) {
  require(stddev >= 0.0, errc::invalid_argument, "add_trace_noise: negative stddev");
  if (stddev == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> pull(0.0, stddev);
  const int faces = 2 * c3.grid.dim();
  for (int f = 0; f < faces; ++f) perturb_stream(c3.v.value[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c3.v.normal_deriv[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c3.m.value[f], rng, pull);
  for (int f = 0; f < faces; ++f) perturb_stream(c3.m.normal_deriv[f], rng, pull);
}

// ---- archives ----

namespace {

using nlohmann::json;

json spec_json(const GridSpec& s) {
  json j;
  j["dim"] = s.dim;
  j["lo"] = std::vector<double>(s.lo.begin(), s.lo.begin() + s.dim);
  j["hi"] = std::vector<double>(s.hi.begin(), s.hi.begin() + s.dim);
  j["nx"] = std::vector<int>(s.nx.begin(), s.nx.begin() + s.dim);
  j["nt"] = s.nt;
  j["horizon"] = s.horizon;
  return j;
}

GridSpec spec_from_json(const json& j) {
  GridSpec s;
  s.dim = j.at("dim").get<int>();
  require(s.dim >= 1 && s.dim <= 3, errc::config_error, "manifest: dim out of range");
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  const auto nx = j.at("nx").get<std::vector<int>>();
  require(lo.size() == static_cast<std::size_t>(s.dim) && hi.size() == lo.size() &&
              nx.size() == lo.size(),
          errc::config_error, "manifest: grid extent arrays do not match dim");
  s.lo = {0.0, 0.0, 0.0};
  s.hi = {0.0, 0.0, 0.0};
  s.nx = {1, 1, 1};
  for (int a = 0; a < s.dim; ++a) {
    s.lo[a] = lo[static_cast<std::size_t>(a)];
    s.hi[a] = hi[static_cast<std::size_t>(a)];
    s.nx[a] = nx[static_cast<std::size_t>(a)];
  }
  s.nt = j.at("nt").get<int>();
  s.horizon = j.at("horizon").get<double>();
  return s;
}

MeasurementC2 empty_c2(const Grid& g) {
  MeasurementC2 c;
  c.grid = g;
  c.m = make_boundary_trace(g, 1);
  for (int f = 0; f < 2 * g.dim(); ++f)
    c.flux_diff[f].assign(static_cast<std::size_t>(face_node_count(g, f)), 0.0);
  return c;
}

std::string stationary_header(const Grid& g, bool cx) {
  std::string h = "face";
  for (int a = 1; a < g.dim(); ++a) h += ",idx" + std::to_string(a);
  h += cx ? ",value_re,value_im,normal_derivative_re,normal_derivative_im,"
            "flux_diff_re,flux_diff_im"
          : ",value,normal_derivative,flux_diff";
  return h;
}

void write_stationary_csv(const std::string& path, const StationaryRecord& r) {
  const Grid& g = r.re.grid;
  const bool cx = r.im.has_value();
  require(r.re.m.levels == 1 && (!cx || r.im->m.levels == 1), errc::invalid_argument,
          "write_archive: stationary record with time levels");
  std::ostringstream os;
  os << stationary_header(g, cx) << '\n';
  char buf[32];
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    require(r.re.m.value[f].size() == static_cast<std::size_t>(nf) &&
                r.re.flux_diff[f].size() == static_cast<std::size_t>(nf),
            errc::invalid_argument, "write_archive: stationary record streams missing");
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      os << f;
      const auto multi = face_node_multi(g, f, fi);
      for (int a = 0; a < g.dim(); ++a)
        if (a != face_axis(f)) os << ',' << multi[a];
      auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, ",%.17g", x);
        os << buf;
      };
      put(r.re.m.val(f, fi, 0));
      if (cx) put(r.im->m.val(f, fi, 0));
      put(r.re.m.nder(f, fi, 0));
      if (cx) put(r.im->m.nder(f, fi, 0));
      put(r.re.flux_diff[f][static_cast<std::size_t>(fi)]);
      if (cx) put(r.im->flux_diff[f][static_cast<std::size_t>(fi)]);
      os << '\n';
    }
  }
  atomic_write_bytes(path, os.str());
}

void read_stationary_csv(const std::string& path, const Grid& g, bool cx,
                         StationaryRecord& r) {
  const std::string bytes = read_file_bytes(path);
  std::istringstream in(bytes);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), errc::io_failure,
          path + ": empty record file");
  require(line == stationary_header(g, cx), errc::io_failure,
          path + ": unexpected record header");
  r.re = empty_c2(g);
  if (cx) r.im = empty_c2(g);
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      require(static_cast<bool>(std::getline(in, line)) && !line.empty(),
              errc::io_failure, path + ": truncated record file");
      std::size_t pos = 0;
      auto next = [&]() {
        const std::size_t comma = line.find(',', pos);
        std::string tok =
            line.substr(pos, comma == std::string::npos ? comma : comma - pos);
        pos = comma == std::string::npos ? line.size() : comma + 1;
        return tok;
      };
      require(std::stoi(next()) == f, errc::io_failure, path + ": unexpected face order");
      for (int a = 1; a < g.dim(); ++a) next();  // tangential indices are positional
      r.re.m.val(f, fi, 0) = std::stod(next());
      if (cx) r.im->m.val(f, fi, 0) = std::stod(next());
      r.re.m.nder(f, fi, 0) = std::stod(next());
      if (cx) r.im->m.nder(f, fi, 0) = std::stod(next());
      r.re.flux_diff[f][static_cast<std::size_t>(fi)] = std::stod(next());
      if (cx) r.im->flux_diff[f][static_cast<std::size_t>(fi)] = std::stod(next());
    }
  }
  while (std::getline(in, line))
    require(line.empty(), errc::io_failure, path + ": trailing rows");
}

void write_hflux_csv(const std::string& path, const Grid& g,
                     const std::array<std::vector<double>, 6>& flux) {
  std::ostringstream os;
  os << "face";
  for (int a = 1; a < g.dim(); ++a) os << ",idx" << a;
  os << ",t,hamiltonian_flux\n";
  char buf[64];
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    require(flux[f].size() == static_cast<std::size_t>(nf) * g.levels,
            errc::invalid_argument, "write_archive: flux stream missing");
    for (int j = 0; j < g.levels; ++j)
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        os << f;
        const auto multi = face_node_multi(g, f, fi);
        for (int a = 0; a < g.dim(); ++a)
          if (a != face_axis(f)) os << ',' << multi[a];
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", g.time(j),
                      flux[f][static_cast<std::size_t>(j * nf + fi)]);
        os << buf << '\n';
      }
  }
  atomic_write_bytes(path, os.str());
}

std::array<std::vector<double>, 6> read_hflux_csv(const std::string& path,
                                                  const Grid& g) {
  const std::string bytes = read_file_bytes(path);
  std::istringstream in(bytes);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), errc::io_failure,
          path + ": empty flux file");
  std::array<std::vector<double>, 6> flux;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    flux[f].assign(static_cast<std::size_t>(nf) * g.levels, 0.0);
    for (int j = 0; j < g.levels; ++j)
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        require(static_cast<bool>(std::getline(in, line)) && !line.empty(),
                errc::io_failure, path + ": truncated flux file");
        std::size_t pos = 0;
        auto next = [&]() {
          const std::size_t comma = line.find(',', pos);
          std::string tok =
              line.substr(pos, comma == std::string::npos ? comma : comma - pos);
          pos = comma == std::string::npos ? line.size() : comma + 1;
          return tok;
        };
        require(std::stoi(next()) == f, errc::io_failure,
                path + ": unexpected face order");
        for (int a = 1; a < g.dim(); ++a) next();
        next();  // level time, redundant with the grid
        flux[f][static_cast<std::size_t>(j * nf + fi)] = std::stod(next());
      }
  }
  while (std::getline(in, line))
    require(line.empty(), errc::io_failure, path + ": trailing rows");
  return flux;
}

json stationary_json(const StationaryRecord& r, const std::string& file) {
  json j;
  j["tag"] = r.tag;
  j["k"] = std::vector<double>(r.k.begin(), r.k.end());
  j["R"] = r.R;
  j["member"] = r.member;
  j["complex"] = r.im.has_value();
  j["file"] = file;
  return j;
}

void stationary_meta(const json& j, StationaryRecord& r) {
  r.tag = j.at("tag").get<std::string>();
  const auto k = j.at("k").get<std::vector<double>>();
  require(k.size() == 3, errc::config_error, "manifest: probe frequency needs 3 entries");
  for (int a = 0; a < 3; ++a) r.k[static_cast<std::size_t>(a)] = k[static_cast<std::size_t>(a)];
  r.R = j.at("R").get<double>();
  r.member = j.at("member").get<int>();
}

// Field reads raise io_failure on anything unexpected inside the file.
template <typename Fn>
auto guarded(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(errc::io_failure, path + ": " + e.what());
  }
}

ScalarField read_census_slice(const std::string& path, const Grid& gs, const Grid& gt) {
  ScalarField f = guarded(path, [&] { return read_scalar_field(path); });
  require(spatial_match(f.grid.spec, gs.spec), errc::io_failure,
          path + ": slice grid does not match the campaign");
  f.grid = gt;  // census slices live on the campaign's time grid
  return f;
}

}  // namespace

void write_archive(const std::string& dir, const CauchyArchive& a) {
  namespace fs = std::filesystem;
  const Grid gt = build_grid(a.grid);
  GridSpec ss = a.grid;
  ss.nt = 0;
  ss.horizon = 0.0;
  const Grid gs = build_grid(ss);

  auto check_stationary = [&](const StationaryRecord& r, const char* what) {
    require(same_spec(r.re.grid.spec, gs.spec) &&
                (!r.im || same_spec(r.im->grid.spec, gs.spec)),
            errc::invalid_argument,
            std::string("write_archive: ") + what + " grid does not match the campaign");
  };
  check_stationary(a.baseline, "baseline");
  for (const StationaryRecord& r : a.stationary) check_stationary(r, "stationary record");
  for (const TimeDependentRecord& r : a.timedep)
    require(same_spec(r.rec.grid.spec, gt.spec) && r.rec.v.levels == gt.levels &&
                r.rec.m.levels == gt.levels,
            errc::invalid_argument,
            "write_archive: lateral record does not match the campaign grid");
  if (a.c1)
    require(same_spec(a.c1->grid.spec, gt.spec) && a.c1->v.levels == gt.levels &&
                a.c1->m.levels == gt.levels,
            errc::invalid_argument,
            "write_archive: full record does not match the campaign grid");

  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, errc::io_failure, "cannot create " + dir + ": " + ec.message());

  json man;
  man["format"] = "mfg-cauchy-archive";
  man["version"] = 1;
  man["grid"] = spec_json(a.grid);
  man["sigma"] = a.sigma_expr;
  man["kappa"] = a.kappa_expr;
  man["noise"] = a.noise;
  man["seed"] = a.seed;
  man["generator_hash"] = a.generator_hash;

  write_stationary_csv(dir + "/baseline.csv", a.baseline);
  man["baseline"] = stationary_json(a.baseline, "baseline.csv");

  char name[64];
  json stats = json::array();
  for (std::size_t i = 0; i < a.stationary.size(); ++i) {
    std::snprintf(name, sizeof name, "stationary_%03zu.csv", i);
    write_stationary_csv(dir + "/" + name, a.stationary[i]);
    stats.push_back(stationary_json(a.stationary[i], name));
  }
  man["stationary"] = stats;

  json tds = json::array();
  for (std::size_t i = 0; i < a.timedep.size(); ++i) {
    std::snprintf(name, sizeof name, "timedep_%03zu", i);
    const std::string vfile = std::string(name) + "_v.csv";
    const std::string mfile = std::string(name) + "_m.csv";
    write_trace_csv(dir + "/" + vfile, a.timedep[i].rec.v);
    write_trace_csv(dir + "/" + mfile, a.timedep[i].rec.m);
    json j;
    j["tag"] = a.timedep[i].tag;
    j["order"] = a.timedep[i].order;
    j["parent_a"] = a.timedep[i].parent_a;
    j["parent_b"] = a.timedep[i].parent_b;
    j["v_file"] = vfile;
    j["m_file"] = mfile;
    tds.push_back(j);
  }
  man["timedep"] = tds;

  if (a.c1) {
    write_trace_csv(dir + "/c1_v.csv", a.c1->v);
    write_trace_csv(dir + "/c1_m.csv", a.c1->m);
    write_hflux_csv(dir + "/c1_hflux.csv", gt, a.c1->hamiltonian_flux);
    write_field(dir + "/c1_v_start.mfgf", a.c1->v_start);
    write_field(dir + "/c1_m_start.mfgf", a.c1->m_start);
    write_field(dir + "/c1_v_end.mfgf", a.c1->v_end);
    write_field(dir + "/c1_m_end.mfgf", a.c1->m_end);
    json j;
    j["v_trace"] = "c1_v.csv";
    j["m_trace"] = "c1_m.csv";
    j["flux"] = "c1_hflux.csv";
    j["v_start"] = "c1_v_start.mfgf";
    j["m_start"] = "c1_m_start.mfgf";
    j["v_end"] = "c1_v_end.mfgf";
    j["m_end"] = "c1_m_end.mfgf";
    man["c1"] = j;
  }

  // The manifest lands last; its presence marks the archive complete.
  atomic_write_bytes(dir + "/manifest.json", man.dump(2) + "\n");
}

CauchyArchive read_archive(const std::string& dir) {
  const std::string mpath = dir + "/manifest.json";
  const std::string bytes = read_file_bytes(mpath);
  json man;
  try {
    man = json::parse(bytes);
  } catch (const std::exception& e) {
    fail(errc::config_error, mpath + ": " + e.what());
  }

  CauchyArchive a;
  std::string baseline_file;
  bool baseline_cx = false;
  struct StatEntry {
    std::string file;
    bool cx;
  };
  std::vector<StatEntry> stat_files;
  struct TdEntry {
    std::string vfile, mfile;
  };
  std::vector<TdEntry> td_files;
  bool has_c1 = false;
  std::string c1_v, c1_m, c1_flux, c1_vs, c1_ms, c1_ve, c1_me;
  try {
    require(man.at("format").get<std::string>() == "mfg-cauchy-archive",
            errc::config_error, mpath + ": not a measurement archive");
    require(man.at("version").get<int>() == 1, errc::config_error,
            mpath + ": unsupported archive version");
    a.grid = spec_from_json(man.at("grid"));
    a.sigma_expr = man.at("sigma").get<std::string>();
    a.kappa_expr = man.at("kappa").get<std::string>();
    a.noise = man.at("noise").get<double>();
    a.seed = man.at("seed").get<std::uint64_t>();
    a.generator_hash = man.at("generator_hash").get<std::string>();

    stationary_meta(man.at("baseline"), a.baseline);
    baseline_cx = man.at("baseline").at("complex").get<bool>();
    baseline_file = man.at("baseline").at("file").get<std::string>();
    for (const json& j : man.at("stationary")) {
      StationaryRecord r;
      stationary_meta(j, r);
      a.stationary.push_back(std::move(r));
      stat_files.push_back({j.at("file").get<std::string>(), j.at("complex").get<bool>()});
    }
    for (const json& j : man.at("timedep")) {
      TimeDependentRecord r;
      r.tag = j.at("tag").get<std::string>();
      r.order = j.at("order").get<int>();
      r.parent_a = j.at("parent_a").get<std::string>();
      r.parent_b = j.at("parent_b").get<std::string>();
      a.timedep.push_back(std::move(r));
      td_files.push_back({j.at("v_file").get<std::string>(), j.at("m_file").get<std::string>()});
    }
    if (man.contains("c1")) {
      const json& j = man.at("c1");
      has_c1 = true;
      c1_v = j.at("v_trace").get<std::string>();
      c1_m = j.at("m_trace").get<std::string>();
      c1_flux = j.at("flux").get<std::string>();
      c1_vs = j.at("v_start").get<std::string>();
      c1_ms = j.at("m_start").get<std::string>();
      c1_ve = j.at("v_end").get<std::string>();
      c1_me = j.at("m_end").get<std::string>();
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(errc::config_error, mpath + ": " + e.what());
  }

  Grid gt, gs;
  try {
    gt = build_grid(a.grid);
    GridSpec ss = a.grid;
    ss.nt = 0;
    ss.horizon = 0.0;
    gs = build_grid(ss);
  } catch (const std::exception& e) {
    fail(errc::config_error, mpath + ": bad campaign grid: " + std::string(e.what()));
  }

  guarded(dir + "/" + baseline_file, [&] {
    read_stationary_csv(dir + "/" + baseline_file, gs, baseline_cx, a.baseline);
    return 0;
  });
  for (std::size_t i = 0; i < a.stationary.size(); ++i) {
    const std::string path = dir + "/" + stat_files[i].file;
    guarded(path, [&] {
      read_stationary_csv(path, gs, stat_files[i].cx, a.stationary[i]);
      return 0;
    });
  }
  for (std::size_t i = 0; i < a.timedep.size(); ++i) {
    TimeDependentRecord& r = a.timedep[i];
    r.rec.grid = gt;
    r.rec.tag = r.tag;
    r.rec.order = r.order;
    const std::string vp = dir + "/" + td_files[i].vfile;
    const std::string mp = dir + "/" + td_files[i].mfile;
    r.rec.v = guarded(vp, [&] { return read_trace_csv(vp, gt); });
    r.rec.m = guarded(mp, [&] { return read_trace_csv(mp, gt); });
    require(r.rec.v.levels == gt.levels && r.rec.m.levels == gt.levels, errc::io_failure,
            vp + ": trace level count does not match the campaign grid");
  }
  if (has_c1) {
    MeasurementC1 c1;
    c1.grid = gt;
    const std::string vp = dir + "/" + c1_v;
    const std::string mp = dir + "/" + c1_m;
    c1.v = guarded(vp, [&] { return read_trace_csv(vp, gt); });
    c1.m = guarded(mp, [&] { return read_trace_csv(mp, gt); });
    require(c1.v.levels == gt.levels && c1.m.levels == gt.levels, errc::io_failure,
            vp + ": trace level count does not match the campaign grid");
    const std::string fp = dir + "/" + c1_flux;
    c1.hamiltonian_flux = guarded(fp, [&] { return read_hflux_csv(fp, gt); });
    c1.v_start = read_census_slice(dir + "/" + c1_vs, gs, gt);
    c1.m_start = read_census_slice(dir + "/" + c1_ms, gs, gt);
    c1.v_end = read_census_slice(dir + "/" + c1_ve, gs, gt);
    c1.m_end = read_census_slice(dir + "/" + c1_me, gs, gt);
    a.c1 = std::move(c1);
  }
  return a;
}

}  // namespace mfg

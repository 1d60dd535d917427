#include "operant/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "operant/errors.hpp"
#include "operant/io.hpp"
#include "operant/rng.hpp"

namespace operant::data {

namespace {

using nlohmann::json;

Vec uniform_closed_grid(int m) {
  Vec x(m);
  for (int i = 0; i < m; ++i) x[i] = static_cast<double>(i) / (m - 1);
  return x;
}

Vec uniform_periodic_grid(int m) {
  Vec x(m);
  for (int i = 0; i < m; ++i) x[i] = static_cast<double>(i) / m;
  return x;
}

// Per-sample seeds: train samples use even child indices, test samples odd,
// so the two families never collide however many of each are drawn.
std::uint64_t derived_seed(std::uint64_t root, long index, bool test) {
  return rng::Stream(root, rng::purpose::sample)
      .child(2 * static_cast<std::uint64_t>(index) + (test ? 1 : 0))
      .next_u64();
}

Vec draw_uniform_vec(rng::Stream s, int n, bool open_low) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = open_low ? s.uniform_open() : s.uniform();
  return v;
}

Mat draw_collocation(rng::Stream s, int q, bool t_open_low) {
  Mat c(q, 2);
  for (int i = 0; i < q; ++i) {
    c(i, 0) = s.uniform();
    c(i, 1) = t_open_low ? s.uniform_open() : s.uniform();
  }
  return c;
}

field::InputFunction sample_scaled(const field::GrfSpec& grf, const Vec& sensors,
                                   std::uint64_t seed, double scale) {
  field::GrfSpec g = grf;
  g.output_scale = grf.output_scale * scale;
  return field::sample_field(g, sensors, seed);
}

// Reduce a time-stepped solution to at most ~101 stored rows, keeping the
// first and final times exactly.
refsol::ReferenceSolution thin_time_rows(const refsol::ReferenceSolution& sol) {
  const Eigen::Index nt = sol.time.size();
  const Eigen::Index stride = (nt + 100) / 101;
  if (stride <= 1) return sol;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index n = 0; n < nt; n += stride) keep.push_back(n);
  if (keep.back() != nt - 1) keep.push_back(nt - 1);
  refsol::ReferenceSolution out;
  out.space = sol.space;
  out.time.resize(static_cast<Eigen::Index>(keep.size()));
  out.values.resize(static_cast<Eigen::Index>(keep.size()), sol.space.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.time[static_cast<Eigen::Index>(r)] = sol.time[keep[r]];
    out.values.row(static_cast<Eigen::Index>(r)) = sol.values.row(keep[r]);
  }
  out.solver = sol.solver;
  out.params = sol.params;
  out.params["rows_stored"] = static_cast<double>(keep.size());
  out.validate();
  return out;
}

OperatorSample generate_train_sample(const BenchmarkSpec& spec,
                                     const field::GrfSpec& grf,
                                     std::uint64_t sample_seed) {
  OperatorSample s;
  const int p = spec.p_points, q = spec.q_points;
  rng::Stream qs(sample_seed, rng::purpose::query_points);
  rng::Stream bs(sample_seed, rng::purpose::boundary_points);
  rng::Stream cs(sample_seed, rng::purpose::collocation);

  switch (spec.tag) {
    case Benchmark::kAntiderivative: {
      s.scale = field::draw_output_scale(sample_seed);
      s.u = sample_scaled(grf, uniform_closed_grid(spec.m_sensors), sample_seed,
                          s.scale);
      s.query = draw_uniform_vec(qs, p, false);
      s.target = refsol::integrate_antiderivative(s.u, s.query)
                     .values.row(0)
                     .transpose();
      s.collocation.resize(0, 2);
      break;
    }
    case Benchmark::kAdvection: {
      const auto v =
          field::sample_field(grf, uniform_closed_grid(spec.m_sensors), sample_seed);
      s.u = field::make_positive_advection_coeff(v);
      s.query = draw_uniform_vec(qs, p, false);
      s.target.resize(p);
      for (int i = 0; i < p; ++i) s.target[i] = refsol::advection_initial(s.query[i]);
      s.boundary = draw_uniform_vec(bs, p, false);
      s.boundary_target.resize(p);
      for (int i = 0; i < p; ++i)
        s.boundary_target[i] = refsol::advection_inflow(s.boundary[i]);
      s.collocation = draw_collocation(cs, q, false);
      break;
    }
    case Benchmark::kBurgers: {
      s.u = field::sample_field(grf, uniform_periodic_grid(spec.m_sensors),
                                sample_seed);
      s.query = draw_uniform_vec(qs, p, false);
      s.target.resize(p);
      for (int i = 0; i < p; ++i) s.target[i] = field::eval_periodic(s.u, s.query[i]);
      s.boundary = draw_uniform_vec(bs, p, false);
      // The residual's time domain excludes t = 0 (the initial line has its
      // own terms), hence the open-below draw.
      s.collocation = draw_collocation(cs, q, true);
      break;
    }
  }
  return s;
}

TestSample generate_test_sample(const BenchmarkSpec& spec,
                                const field::GrfSpec& grf,
                                std::uint64_t sample_seed, double fixed_scale) {
  TestSample t;
  switch (spec.tag) {
    case Benchmark::kAntiderivative: {
      t.scale = fixed_scale;
      t.u = sample_scaled(grf, uniform_closed_grid(spec.m_sensors), sample_seed,
                          fixed_scale);
      t.reference =
          refsol::integrate_antiderivative(t.u, uniform_closed_grid(101));
      break;
    }
    case Benchmark::kAdvection: {
      const auto v =
          field::sample_field(grf, uniform_closed_grid(spec.m_sensors), sample_seed);
      t.u = field::make_positive_advection_coeff(v);
      const int nx = 100;
      const int nt = refsol::advection_required_nt(t.u, nx);
      t.reference = thin_time_rows(refsol::solve_advection(t.u, nx, nt));
      break;
    }
    case Benchmark::kBurgers: {
      t.u = field::sample_field(grf, uniform_periodic_grid(spec.m_sensors),
                                sample_seed);
      // Re-sample the same spectral draw on the solver's own grid so the
      // reference integrates the exact series, not the sensor polyline.
      const auto u_solver =
          field::sample_field(grf, uniform_closed_grid(129), sample_seed);
      t.reference =
          refsol::solve_burgers(u_solver, spec.viscosity, 128, 1e-3, 10);
      break;
    }
  }
  return t;
}

void append_point_row(io::CsvWriter& w, long sample_id, const char* role,
                      double c0, double c1, double target) {
  w.row({std::to_string(sample_id), role, io::format_double(c0),
         io::format_double(c1), io::format_double(target)});
}

json grf_to_json(const field::GrfSpec& g) {
  return json{{"kernel_family", field::kernel_family_name(g.kernel_family)},
              {"length_scale", g.length_scale},
              {"output_scale", g.output_scale},
              {"spectral_exponent", g.spectral_exponent},
              {"spectral_shift", g.spectral_shift},
              {"num_modes", g.num_modes}};
}

field::GrfSpec grf_from_json(const json& j) {
  field::GrfSpec g;
  g.kernel_family =
      field::kernel_family_from_name(j.at("kernel_family").get<std::string>());
  g.length_scale = j.at("length_scale").get<double>();
  g.output_scale = j.at("output_scale").get<double>();
  g.spectral_exponent = j.at("spectral_exponent").get<double>();
  g.spectral_shift = j.at("spectral_shift").get<double>();
  g.num_modes = j.at("num_modes").get<int>();
  return g;
}

}  // namespace

std::string benchmark_name(Benchmark b) {
  switch (b) {
    case Benchmark::kAntiderivative: return "antiderivative";
    case Benchmark::kAdvection: return "advection";
    case Benchmark::kBurgers: return "burgers";
  }
  throw ConfigError("unreachable benchmark tag");
}

Benchmark benchmark_from_name(const std::string& name) {
  if (name == "antiderivative") return Benchmark::kAntiderivative;
  if (name == "advection") return Benchmark::kAdvection;
  if (name == "burgers") return Benchmark::kBurgers;
  throw ConfigError("unknown benchmark '" + name +
                    "' (expected antiderivative, advection or burgers)");
}

void BenchmarkSpec::validate() const {
  if (n_train <= 0) throw ConfigError("benchmark needs n_train > 0");
  if (m_sensors < 2) throw ConfigError("benchmark needs m_sensors >= 2");
  if (p_points <= 0) throw ConfigError("benchmark needs p_points > 0");
  if (tag == Benchmark::kAntiderivative) {
    if (q_points != 0)
      throw ConfigError(
          "the supervised antiderivative benchmark takes no residual points "
          "(q_points must be 0)");
  } else if (q_points <= 0) {
    throw ConfigError("physics-informed benchmarks need q_points > 0");
  }
  if (tag == Benchmark::kBurgers && viscosity <= 0.0)
    throw ConfigError("burgers viscosity must be positive");
}

int BenchmarkSpec::terms_per_sample() const {
  switch (tag) {
    case Benchmark::kAntiderivative: return p_points;
    case Benchmark::kAdvection: return 2 * p_points + q_points;
    case Benchmark::kBurgers: return 3 * p_points + q_points;
  }
  throw ConfigError("unreachable benchmark tag");
}

long BenchmarkSpec::n_terms() const {
  return static_cast<long>(n_train) * terms_per_sample();
}

int BenchmarkSpec::point_dim() const {
  return tag == Benchmark::kAntiderivative ? 1 : 2;
}

const std::vector<double>& antiderivative_test_scales() {
  static const std::vector<double> kScales = {1e-2, 1e-1, 1.0, 1e1, 1e2};
  return kScales;
}

void OperatorDataset::validate() const {
  spec.validate();
  grf.validate();
  if (static_cast<int>(train.size()) != spec.n_train)
    throw ShapeError("dataset holds " + std::to_string(train.size()) +
                     " train samples, expected " + std::to_string(spec.n_train));
  const int expected_test =
      spec.tag == Benchmark::kAntiderivative
          ? n_test * static_cast<int>(antiderivative_test_scales().size())
          : n_test;
  if (static_cast<int>(test.size()) != expected_test)
    throw ShapeError("dataset holds " + std::to_string(test.size()) +
                     " test samples, expected " + std::to_string(expected_test));
  const bool has_boundary = spec.tag != Benchmark::kAntiderivative;
  const bool boundary_targeted = spec.tag == Benchmark::kAdvection;
  for (const auto& s : train) {
    if (s.u.sensor_values.size() != spec.m_sensors)
      throw ShapeError("train sample sensor count mismatch");
    if (s.query.size() != spec.p_points || s.target.size() != spec.p_points)
      throw ShapeError("train sample query/target count mismatch");
    if (s.boundary.size() != (has_boundary ? spec.p_points : 0))
      throw ShapeError("train sample boundary count mismatch");
    if (s.boundary_target.size() != (boundary_targeted ? spec.p_points : 0))
      throw ShapeError("train sample boundary target count mismatch");
    if (s.collocation.rows() != spec.q_points)
      throw ShapeError("train sample collocation count mismatch");
    if (!(s.scale > 0.0)) throw NumericalError("sample scale must be positive");
  }
  for (const auto& t : test) {
    if (t.u.sensor_values.size() != spec.m_sensors)
      throw ShapeError("test sample sensor count mismatch");
    t.reference.validate();
  }
}

OperatorDataset generate_dataset(const BenchmarkSpec& spec,
                                 const field::GrfSpec& grf, int n_test,
                                 std::uint64_t seed) {
  spec.validate();
  grf.validate();
  if (n_test <= 0) throw ConfigError("dataset needs n_test > 0");
  const bool needs_periodic = spec.tag == Benchmark::kBurgers;
  const bool is_periodic =
      grf.kernel_family == field::KernelFamily::kPeriodicSpectral;
  if (needs_periodic != is_periodic)
    throw ConfigError(needs_periodic
                          ? "the burgers benchmark needs the periodic-spectral "
                            "kernel family"
                          : "only the burgers benchmark supports the "
                            "periodic-spectral kernel family");

  OperatorDataset ds;
  ds.spec = spec;
  ds.grf = grf;
  ds.seed = seed;
  ds.n_test = n_test;

  ds.train.reserve(spec.n_train);
  for (int i = 0; i < spec.n_train; ++i)
    ds.train.push_back(
        generate_train_sample(spec, grf, derived_seed(seed, i, false)));

  if (spec.tag == Benchmark::kAntiderivative) {
    // Paired design: group g, member j reuses member j's base draw, so the
    // five amplitude groups differ only by their scale factor and per-scale
    // error means are directly comparable.
    const auto& scales = antiderivative_test_scales();
    ds.test.reserve(scales.size() * n_test);
    for (std::size_t g = 0; g < scales.size(); ++g)
      for (int j = 0; j < n_test; ++j)
        ds.test.push_back(generate_test_sample(
            spec, grf, derived_seed(seed, j, true), scales[g]));
  } else {
    ds.test.reserve(n_test);
    for (int j = 0; j < n_test; ++j)
      ds.test.push_back(
          generate_test_sample(spec, grf, derived_seed(seed, j, true), 1.0));
  }
  ds.validate();
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const OperatorDataset& ds,
                  const std::string& config_json) {
  ds.validate();
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["version"] = 1;
  manifest["benchmark"] = benchmark_name(ds.spec.tag);
  manifest["viscosity"] = ds.spec.viscosity;
  manifest["n_train"] = ds.spec.n_train;
  manifest["m_sensors"] = ds.spec.m_sensors;
  manifest["p_points"] = ds.spec.p_points;
  manifest["q_points"] = ds.spec.q_points;
  manifest["grf"] = grf_to_json(ds.grf);
  manifest["seed"] = ds.seed;
  manifest["n_test"] = ds.n_test;
  manifest["config"] = config_json;
  json train_seeds = json::array(), train_scales = json::array();
  for (const auto& s : ds.train) {
    train_seeds.push_back(s.u.seed);
    train_scales.push_back(s.scale);
  }
  manifest["train_seeds"] = std::move(train_seeds);
  manifest["train_scales"] = std::move(train_scales);
  json test_seeds = json::array(), test_scales = json::array(),
       test_solvers = json::array();
  for (const auto& t : ds.test) {
    test_seeds.push_back(t.u.seed);
    test_scales.push_back(t.scale);
    json params = json::object();
    for (const auto& [k, v] : t.reference.params) params[k] = v;
    test_solvers.push_back(json{{"solver", t.reference.solver},
                                {"params", std::move(params)}});
  }
  manifest["test_seeds"] = std::move(test_seeds);
  manifest["test_scales"] = std::move(test_scales);
  manifest["test_solvers"] = std::move(test_solvers);
  io::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  const auto write_sensors = [&](const char* name, auto&& samples) {
    io::CsvWriter w(dir / name, {"sample_id", "location", "value"});
    long id = 0;
    for (const auto& s : samples) {
      for (Eigen::Index i = 0; i < s.u.sensor_locations.size(); ++i)
        w.row({std::to_string(id), io::format_double(s.u.sensor_locations[i]),
               io::format_double(s.u.sensor_values[i])});
      ++id;
    }
  };
  write_sensors("train_sensors.csv", ds.train);
  write_sensors("test_sensors.csv", ds.test);

  {
    io::CsvWriter w(dir / "train_points.csv",
                    {"sample_id", "role", "c0", "c1", "target"});
    for (long id = 0; id < static_cast<long>(ds.train.size()); ++id) {
      const auto& s = ds.train[id];
      for (Eigen::Index i = 0; i < s.query.size(); ++i)
        append_point_row(w, id, "query", s.query[i], 0.0, s.target[i]);
      for (Eigen::Index i = 0; i < s.boundary.size(); ++i)
        append_point_row(w, id, "boundary", s.boundary[i], 0.0,
                         s.boundary_target.size() ? s.boundary_target[i] : 0.0);
      for (Eigen::Index i = 0; i < s.collocation.rows(); ++i)
        append_point_row(w, id, "collocation", s.collocation(i, 0),
                         s.collocation(i, 1), 0.0);
    }
  }

  {
    io::CsvWriter w(dir / "test_refs.csv", {"sample_id", "t", "x", "value"});
    for (long id = 0; id < static_cast<long>(ds.test.size()); ++id) {
      const auto& r = ds.test[id].reference;
      if (r.time.size() == 0) {
        for (Eigen::Index i = 0; i < r.space.size(); ++i)
          w.row({std::to_string(id), "0", io::format_double(r.space[i]),
                 io::format_double(r.values(0, i))});
      } else {
        for (Eigen::Index n = 0; n < r.time.size(); ++n)
          for (Eigen::Index i = 0; i < r.space.size(); ++i)
            w.row({std::to_string(id), io::format_double(r.time[n]),
                   io::format_double(r.space[i]),
                   io::format_double(r.values(n, i))});
      }
    }
  }
}

namespace {

// Splits a long-format CSV into per-sample row ranges, expecting ids
// 0..n-1 in order.
std::vector<std::pair<std::size_t, std::size_t>> sample_ranges(
    const io::CsvTable& t, int id_col, long n, const std::string& what) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  ranges.reserve(static_cast<std::size_t>(n));
  std::size_t row = 0;
  for (long id = 0; id < n; ++id) {
    const std::size_t begin = row;
    while (row < t.rows.size() &&
           static_cast<long>(t.number(row, id_col)) == id)
      ++row;
    if (row == begin)
      throw DataError(what + ": no rows for sample " + std::to_string(id));
    ranges.emplace_back(begin, row);
  }
  if (row != t.rows.size())
    throw DataError(what + ": trailing rows after the last declared sample");
  return ranges;
}

int require_column(const io::CsvTable& t, const std::string& name,
                   const std::string& file) {
  const int c = t.column_index(name);
  if (c < 0) throw DataError(file + " lacks the required column '" + name + "'");
  return c;
}

}  // namespace

OperatorDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(io::read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw DataError("dataset manifest parse failure at " +
                    manifest_path.string() + ": " + e.what());
  }
  OperatorDataset ds;
  try {
    if (manifest.at("version").get<int>() != 1)
      throw DataError("unsupported dataset manifest version at " +
                      manifest_path.string());
    ds.spec.tag = benchmark_from_name(manifest.at("benchmark").get<std::string>());
    ds.spec.viscosity = manifest.at("viscosity").get<double>();
    ds.spec.n_train = manifest.at("n_train").get<int>();
    ds.spec.m_sensors = manifest.at("m_sensors").get<int>();
    ds.spec.p_points = manifest.at("p_points").get<int>();
    ds.spec.q_points = manifest.at("q_points").get<int>();
    ds.grf = grf_from_json(manifest.at("grf"));
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.n_test = manifest.at("n_test").get<int>();
  } catch (const json::exception& e) {
    throw DataError("dataset manifest at " + manifest_path.string() +
                    " is missing fields: " + e.what());
  }

  const auto load_sensor_file = [&](const char* name, long n) {
    const auto path = dir / name;
    const auto t = io::read_csv(path);
    const int c_id = require_column(t, "sample_id", name);
    const int c_loc = require_column(t, "location", name);
    const int c_val = require_column(t, "value", name);
    std::vector<field::InputFunction> fns;
    fns.reserve(static_cast<std::size_t>(n));
    for (const auto& [begin, end] : sample_ranges(t, c_id, n, name)) {
      field::InputFunction fn;
      const auto m = static_cast<Eigen::Index>(end - begin);
      fn.sensor_locations.resize(m);
      fn.sensor_values.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        fn.sensor_locations[i] = t.number(begin + static_cast<std::size_t>(i), c_loc);
        fn.sensor_values[i] = t.number(begin + static_cast<std::size_t>(i), c_val);
      }
      fns.push_back(std::move(fn));
    }
    return fns;
  };

  auto train_fns = load_sensor_file("train_sensors.csv", ds.spec.n_train);
  const auto& train_seeds = manifest.at("train_seeds");
  const auto& train_scales = manifest.at("train_scales");
  if (static_cast<long>(train_seeds.size()) != ds.spec.n_train ||
      static_cast<long>(train_scales.size()) != ds.spec.n_train)
    throw DataError("manifest train seed/scale lists do not match n_train");

  const auto points_path = dir / "train_points.csv";
  const auto pts = io::read_csv(points_path);
  const int c_id = require_column(pts, "sample_id", "train_points.csv");
  const int c_role = require_column(pts, "role", "train_points.csv");
  const int c_c0 = require_column(pts, "c0", "train_points.csv");
  const int c_c1 = require_column(pts, "c1", "train_points.csv");
  const int c_target = require_column(pts, "target", "train_points.csv");
  const auto point_ranges =
      sample_ranges(pts, c_id, ds.spec.n_train, "train_points.csv");

  const bool has_boundary = ds.spec.tag != Benchmark::kAntiderivative;
  const bool boundary_targeted = ds.spec.tag == Benchmark::kAdvection;
  ds.train.reserve(static_cast<std::size_t>(ds.spec.n_train));
  for (long id = 0; id < ds.spec.n_train; ++id) {
    OperatorSample s;
    s.u = std::move(train_fns[static_cast<std::size_t>(id)]);
    s.u.seed = train_seeds[static_cast<std::size_t>(id)].get<std::uint64_t>();
    s.scale = train_scales[static_cast<std::size_t>(id)].get<double>();
    std::vector<double> q, qt, b, bt;
    std::vector<std::array<double, 2>> coll;
    for (std::size_t r = point_ranges[static_cast<std::size_t>(id)].first;
         r < point_ranges[static_cast<std::size_t>(id)].second; ++r) {
      const std::string& role = pts.rows[r][static_cast<std::size_t>(c_role)];
      if (role == "query") {
        q.push_back(pts.number(r, c_c0));
        qt.push_back(pts.number(r, c_target));
      } else if (role == "boundary") {
        b.push_back(pts.number(r, c_c0));
        bt.push_back(pts.number(r, c_target));
      } else if (role == "collocation") {
        coll.push_back({pts.number(r, c_c0), pts.number(r, c_c1)});
      } else {
        throw DataError("train_points.csv: unknown point role '" + role + "'");
      }
    }
    s.query = Eigen::Map<const Vec>(q.data(), static_cast<Eigen::Index>(q.size()));
    s.target = Eigen::Map<const Vec>(qt.data(), static_cast<Eigen::Index>(qt.size()));
    if (has_boundary)
      s.boundary = Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
    if (boundary_targeted)
      s.boundary_target =
          Eigen::Map<const Vec>(bt.data(), static_cast<Eigen::Index>(bt.size()));
    s.collocation.resize(static_cast<Eigen::Index>(coll.size()), 2);
    for (std::size_t i = 0; i < coll.size(); ++i) {
      s.collocation(static_cast<Eigen::Index>(i), 0) = coll[i][0];
      s.collocation(static_cast<Eigen::Index>(i), 1) = coll[i][1];
    }
    ds.train.push_back(std::move(s));
  }

  const long expected_test =
      ds.spec.tag == Benchmark::kAntiderivative
          ? static_cast<long>(ds.n_test) *
                static_cast<long>(antiderivative_test_scales().size())
          : ds.n_test;
  auto test_fns = load_sensor_file("test_sensors.csv", expected_test);
  const auto& test_seeds = manifest.at("test_seeds");
  const auto& test_scales = manifest.at("test_scales");
  const auto& test_solvers = manifest.at("test_solvers");
  if (static_cast<long>(test_seeds.size()) != expected_test ||
      static_cast<long>(test_scales.size()) != expected_test ||
      static_cast<long>(test_solvers.size()) != expected_test)
    throw DataError("manifest test seed/scale/solver lists do not match n_test");

  const auto refs = io::read_csv(dir / "test_refs.csv");
  const int r_id = require_column(refs, "sample_id", "test_refs.csv");
  const int r_t = require_column(refs, "t", "test_refs.csv");
  const int r_x = require_column(refs, "x", "test_refs.csv");
  const int r_val = require_column(refs, "value", "test_refs.csv");
  const auto ref_ranges = sample_ranges(refs, r_id, expected_test, "test_refs.csv");

  ds.test.reserve(static_cast<std::size_t>(expected_test));
  for (long id = 0; id < expected_test; ++id) {
    TestSample ts;
    ts.u = std::move(test_fns[static_cast<std::size_t>(id)]);
    ts.u.seed = test_seeds[static_cast<std::size_t>(id)].get<std::uint64_t>();
    ts.scale = test_scales[static_cast<std::size_t>(id)].get<double>();
    const auto [begin, end] = ref_ranges[static_cast<std::size_t>(id)];
    const std::size_t total = end - begin;
    refsol::ReferenceSolution& r = ts.reference;
    if (ds.spec.tag == Benchmark::kAntiderivative) {
      r.space.resize(static_cast<Eigen::Index>(total));
      r.values.resize(1, static_cast<Eigen::Index>(total));
      for (std::size_t i = 0; i < total; ++i) {
        r.space[static_cast<Eigen::Index>(i)] = refs.number(begin + i, r_x);
        r.values(0, static_cast<Eigen::Index>(i)) = refs.number(begin + i, r_val);
      }
    } else {
      // Rows are time-major; the leading block sharing the first row's time
      // value fixes the spatial grid size.
      std::size_t nx = 1;
      while (begin + nx < end &&
             refs.rows[begin + nx][static_cast<std::size_t>(r_t)] ==
                 refs.rows[begin][static_cast<std::size_t>(r_t)])
        ++nx;
      if (total % nx != 0)
        throw DataError("test_refs.csv: sample " + std::to_string(id) +
                        " rows do not form a full space-time grid");
      const std::size_t nt = total / nx;
      r.space.resize(static_cast<Eigen::Index>(nx));
      r.time.resize(static_cast<Eigen::Index>(nt));
      r.values.resize(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nx));
      for (std::size_t i = 0; i < nx; ++i)
        r.space[static_cast<Eigen::Index>(i)] = refs.number(begin + i, r_x);
      for (std::size_t n = 0; n < nt; ++n) {
        r.time[static_cast<Eigen::Index>(n)] = refs.number(begin + n * nx, r_t);
        for (std::size_t i = 0; i < nx; ++i)
          r.values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) =
              refs.number(begin + n * nx + i, r_val);
      }
    }
    const auto& meta = test_solvers[static_cast<std::size_t>(id)];
    try {
      r.solver = meta.at("solver").get<std::string>();
      for (const auto& [k, v] : meta.at("params").items())
        r.params[k] = v.get<double>();
    } catch (const json::exception& e) {
      throw DataError("dataset manifest test_solvers entry " +
                      std::to_string(id) + " is malformed: " + e.what());
    }
    ds.test.push_back(std::move(ts));
  }

  ds.validate();
  return ds;
}

}  // namespace operant::data

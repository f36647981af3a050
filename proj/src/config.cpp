#include "sregame/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sregame {

namespace {

[[noreturn]] void bad(const std::string& what) { fail(ErrorCode::ConfigError, what); }

YAML::Node child(const YAML::Node& n, const char* key, const std::string& where) {
  const YAML::Node c = n[key];
  if (!c) bad("missing '" + std::string(key) + "' in " + where);
  return c;
}

template <class T>
T get(const YAML::Node& n, const char* key, const std::string& where) {
  try {
    return child(n, key, where).as<T>();
  } catch (const YAML::Exception& e) {
    bad("bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

template <class T>
T get_or(const YAML::Node& n, const char* key, T def, const std::string& where) {
  if (!n || !n[key]) return def;
  return get<T>(n, key, where);
}

Vec read_vec(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence()) bad(where + " must be a list");
  Vec v(static_cast<Eigen::Index>(n.size()));
  try {
    for (std::size_t j = 0; j < n.size(); ++j) v(static_cast<Eigen::Index>(j)) = n[j].as<double>();
  } catch (const YAML::Exception& e) {
    bad(where + ": " + e.what());
  }
  return v;
}

Mat read_mat(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence() || n.size() == 0) bad(where + " must be a non-empty list of rows");
  const Vec first = read_vec(n[0], where);
  Mat m(static_cast<Eigen::Index>(n.size()), first.size());
  for (std::size_t r = 0; r < n.size(); ++r) {
    const Vec row = read_vec(n[r], where);
    if (row.size() != first.size()) bad(where + " has ragged rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Vec vec_or_zero(const YAML::Node& n, const char* key, int dim, const std::string& where) {
  if (!n[key]) return Vec::Zero(dim);
  const Vec v = read_vec(n[key], where + "." + key);
  if (v.size() != dim) bad(where + "." + key + " must have " + std::to_string(dim) + " entries");
  return v;
}

Mat mat_or_zero(const YAML::Node& n, const char* key, int rows, int cols, const std::string& where) {
  if (!n[key]) return Mat::Zero(rows, cols);
  const Mat m = read_mat(n[key], where + "." + key);
  if (m.rows() != rows || m.cols() != cols)
    bad(where + "." + key + " must be " + std::to_string(rows) + "x" + std::to_string(cols));
  return m;
}

ConeConfig read_cone(const YAML::Node& n, const std::string& where) {
  ConeConfig c;
  if (!n) return c;
  const std::string kind = get<std::string>(n, "kind", where);
  if (kind == "full") {
    c.kind = ConeKind::FullSpace;
  } else if (kind == "orthant") {
    c.kind = ConeKind::NonNegOrthant;
  } else if (kind == "rays") {
    c.kind = ConeKind::FiniteGenerator;
    c.rays = read_mat(child(n, "rays", where), where + ".rays").transpose();
  } else {
    bad("unknown cone kind '" + kind + "' in " + where);
  }
  return c;
}

const char* cone_kind_name(ConeKind k) {
  switch (k) {
    case ConeKind::FullSpace: return "full";
    case ConeKind::NonNegOrthant: return "orthant";
    case ConeKind::FiniteGenerator: return "rays";
  }
  return "full";
}

void emit_vec(YAML::Emitter& out, const Vec& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index j = 0; j < v.size(); ++j) out << v(j);
  out << YAML::EndSeq;
}

void emit_mat(YAML::Emitter& out, const Mat& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << m(r, c);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

void emit_cone(YAML::Emitter& out, const ConeConfig& c) {
  out << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << cone_kind_name(c.kind);
  if (c.kind == ConeKind::FiniteGenerator) {
    out << YAML::Key << "rays" << YAML::Value;
    emit_mat(out, c.rays.transpose());
  }
  out << YAML::EndMap;
}

ScenarioConfig from_node(const YAML::Node& root) {
  if (!root.IsMap()) bad("config must be a mapping");
  ScenarioConfig cfg;
  const YAML::Node sc = child(root, "scenario", "config");
  cfg.name = get_or<std::string>(sc, "name", cfg.name, "scenario");
  cfg.horizon = get<double>(sc, "horizon", "scenario");
  cfg.x0 = get_or<double>(sc, "x0", cfg.x0, "scenario");
  cfg.i0 = get_or<int>(sc, "i0", cfg.i0, "scenario");

  const YAML::Node rg = child(root, "regimes", "config");
  cfg.generator = read_mat(child(rg, "generator", "regimes"), "regimes.generator");
  const int l = static_cast<int>(cfg.generator.rows());

  const bool has_game = static_cast<bool>(root["dynamics"]);
  const bool has_market = static_cast<bool>(root["market"]);
  if (has_game == has_market) bad("exactly one of the dynamics or market sections is required");

  if (has_game) {
    GameSection g;
    const YAML::Node dy = root["dynamics"];
    g.dims.n = get<int>(dy, "n", "dynamics");
    g.dims.m1 = get<int>(dy, "m1", "dynamics");
    g.dims.m2 = get<int>(dy, "m2", "dynamics");
    if (g.dims.n < 1 || g.dims.m1 < 1 || g.dims.m2 < 1) bad("dimensions must be >= 1");
    const YAML::Node dpr = child(dy, "per_regime", "dynamics");
    const YAML::Node cost = child(root, "cost", "config");
    const YAML::Node cpr = child(cost, "per_regime", "cost");
    if (!dpr.IsSequence() || static_cast<int>(dpr.size()) != l)
      bad("dynamics.per_regime needs one entry per regime");
    if (!cpr.IsSequence() || static_cast<int>(cpr.size()) != l)
      bad("cost.per_regime needs one entry per regime");
    const Dimensions d = g.dims;
    for (int i = 0; i < l; ++i) {
      const std::string dw = "dynamics.per_regime[" + std::to_string(i) + "]";
      const std::string cw = "cost.per_regime[" + std::to_string(i) + "]";
      const YAML::Node a = dpr[i], c = cpr[i];
      NodeCoefficients nc = NodeCoefficients::zeros(d);
      nc.A = get_or<double>(a, "A", 0.0, dw);
      nc.B1 = vec_or_zero(a, "B1", d.m1, dw);
      nc.B2 = vec_or_zero(a, "B2", d.m2, dw);
      nc.b = get_or<double>(a, "b", 0.0, dw);
      nc.C = vec_or_zero(a, "C", d.n, dw);
      nc.D1 = mat_or_zero(a, "D1", d.n, d.m1, dw);
      nc.D2 = mat_or_zero(a, "D2", d.n, d.m2, dw);
      nc.sigma = vec_or_zero(a, "sigma", d.n, dw);
      nc.K = get_or<double>(c, "K", 0.0, cw);
      nc.R11 = mat_or_zero(c, "R11", d.m1, d.m1, cw);
      nc.R12 = mat_or_zero(c, "R12", d.m1, d.m2, cw);
      nc.R22 = mat_or_zero(c, "R22", d.m2, d.m2, cw);
      g.per_regime.push_back(std::move(nc));
    }
    const Vec G = read_vec(child(cost, "G", "cost"), "cost.G");
    g.G.assign(G.data(), G.data() + G.size());
    const YAML::Node cones = root["cones"];
    if (cones) {
      g.cone1 = read_cone(cones["player1"], "cones.player1");
      g.cone2 = read_cone(cones["player2"], "cones.player2");
    }
    if (const YAML::Node f = root["factor"]) {
      const YAML::Node lo = child(f, "loadings", "factor");
      if (!lo.IsSequence() || static_cast<int>(lo.size()) != l)
        bad("factor.loadings needs one entry per regime");
      std::vector<FactorLoading> ls;
      for (int i = 0; i < l; ++i) {
        const std::string w = "factor.loadings[" + std::to_string(i) + "]";
        FactorLoading fl = FactorLoading::zeros(d);
        fl.A = get_or<double>(lo[i], "A", 0.0, w);
        fl.B1 = vec_or_zero(lo[i], "B1", d.m1, w);
        fl.B2 = vec_or_zero(lo[i], "B2", d.m2, w);
        fl.C = vec_or_zero(lo[i], "C", d.n, w);
        fl.K = get_or<double>(lo[i], "K", 0.0, w);
        ls.push_back(std::move(fl));
      }
      g.loadings = std::move(ls);
    }
    cfg.game = std::move(g);
  } else {
    MarketSection m;
    const YAML::Node mk = root["market"];
    m.y1 = get<double>(mk, "y1", "market");
    m.y2 = get<double>(mk, "y2", "market");
    m.constraint = parse_constraint(get_or<std::string>(mk, "constraint", "none", "market"));
    const YAML::Node pr = child(mk, "per_regime", "market");
    if (!pr.IsSequence() || static_cast<int>(pr.size()) != l)
      bad("market.per_regime needs one entry per regime");
    for (int i = 0; i < l; ++i) {
      const std::string w = "market.per_regime[" + std::to_string(i) + "]";
      MarketPoint p;
      p.r = get<double>(pr[i], "r", w);
      p.mu1 = get<double>(pr[i], "mu1", w);
      p.mu2 = get<double>(pr[i], "mu2", w);
      p.sigma1 = vec_or_zero(pr[i], "sigma1", 2, w);
      p.sigma2 = vec_or_zero(pr[i], "sigma2", 2, w);
      p.R1 = get<double>(pr[i], "R1", w);
      p.R2 = get<double>(pr[i], "R2", w);
      m.per_regime.push_back(std::move(p));
    }
    cfg.market = std::move(m);
  }

  const YAML::Node gr = root["grid"];
  cfg.steps = get_or<int>(gr, "steps", cfg.steps, "grid");
  const YAML::Node mc = root["monte_carlo"];
  cfg.paths = get_or<std::int64_t>(mc, "paths", cfg.paths, "monte_carlo");
  cfg.seed = get_or<std::uint64_t>(mc, "seed", cfg.seed, "monte_carlo");
  cfg.workers = get_or<int>(mc, "workers", cfg.workers, "monte_carlo");
  const YAML::Node ve = root["verification"];
  auto& v = cfg.verification;
  v.perturbations = get_or<int>(ve, "perturbations", v.perturbations, "verification");
  v.perturbation_scale = get_or<double>(ve, "perturbation_scale", v.perturbation_scale, "verification");
  v.perturbation_seed = get_or<std::uint64_t>(ve, "perturbation_seed", v.perturbation_seed, "verification");
  if (ve && ve["truncation_levels"]) {
    const Vec t = read_vec(ve["truncation_levels"], "verification.truncation_levels");
    v.truncation_levels.clear();
    for (Eigen::Index j = 0; j < t.size(); ++j) v.truncation_levels.push_back(static_cast<int>(t(j)));
  }
  v.certify_stride = get_or<int>(ve, "certify_stride", v.certify_stride, "verification");
  v.basis_degree = get_or<int>(ve, "basis_degree", v.basis_degree, "verification");
  v.soft_sigma = get_or<double>(ve, "soft_sigma", v.soft_sigma, "verification");
  v.hard_sigma = get_or<double>(ve, "hard_sigma", v.hard_sigma, "verification");
  if (!(v.soft_sigma > 0.0) || v.hard_sigma < v.soft_sigma)
    bad("verification thresholds need 0 < soft_sigma <= hard_sigma");
  cfg.output_dir = get_or<std::string>(root["output"], "directory", cfg.output_dir, "output");
  return cfg;
}

}  // namespace

ConeSpec ConeConfig::build(int dim) const {
  switch (kind) {
    case ConeKind::FullSpace: return ConeSpec::full(dim);
    case ConeKind::NonNegOrthant: return ConeSpec::orthant(dim);
    case ConeKind::FiniteGenerator:
      if (rays.rows() != dim) fail(ErrorCode::ConfigError, "cone rays have the wrong length");
      return ConeSpec::generated(rays);
  }
  return ConeSpec::full(dim);
}

ScenarioConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    bad(std::string("malformed YAML: ") + e.what());
  }
  return from_node(root);
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << cfg.name;
  out << YAML::Key << "horizon" << YAML::Value << cfg.horizon;
  out << YAML::Key << "x0" << YAML::Value << cfg.x0;
  out << YAML::Key << "i0" << YAML::Value << cfg.i0;
  out << YAML::EndMap;
  out << YAML::Key << "regimes" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "generator" << YAML::Value;
  emit_mat(out, cfg.generator);
  out << YAML::EndMap;

  if (cfg.game) {
    const GameSection& g = *cfg.game;
    out << YAML::Key << "dynamics" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n" << YAML::Value << g.dims.n;
    out << YAML::Key << "m1" << YAML::Value << g.dims.m1;
    out << YAML::Key << "m2" << YAML::Value << g.dims.m2;
    out << YAML::Key << "per_regime" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : g.per_regime) {
      out << YAML::BeginMap;
      out << YAML::Key << "A" << YAML::Value << c.A;
      out << YAML::Key << "B1" << YAML::Value;
      emit_vec(out, c.B1);
      out << YAML::Key << "B2" << YAML::Value;
      emit_vec(out, c.B2);
      out << YAML::Key << "b" << YAML::Value << c.b;
      out << YAML::Key << "C" << YAML::Value;
      emit_vec(out, c.C);
      out << YAML::Key << "D1" << YAML::Value;
      emit_mat(out, c.D1);
      out << YAML::Key << "D2" << YAML::Value;
      emit_mat(out, c.D2);
      out << YAML::Key << "sigma" << YAML::Value;
      emit_vec(out, c.sigma);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
    out << YAML::Key << "cost" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "per_regime" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : g.per_regime) {
      out << YAML::BeginMap;
      out << YAML::Key << "K" << YAML::Value << c.K;
      out << YAML::Key << "R11" << YAML::Value;
      emit_mat(out, c.R11);
      out << YAML::Key << "R12" << YAML::Value;
      emit_mat(out, c.R12);
      out << YAML::Key << "R22" << YAML::Value;
      emit_mat(out, c.R22);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "G" << YAML::Value;
    emit_vec(out, Eigen::Map<const Vec>(g.G.data(), static_cast<Eigen::Index>(g.G.size())));
    out << YAML::EndMap;
    out << YAML::Key << "cones" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "player1" << YAML::Value;
    emit_cone(out, g.cone1);
    out << YAML::Key << "player2" << YAML::Value;
    emit_cone(out, g.cone2);
    out << YAML::EndMap;
    if (g.loadings) {
      out << YAML::Key << "factor" << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "loadings" << YAML::Value << YAML::BeginSeq;
      for (const auto& f : *g.loadings) {
        out << YAML::BeginMap;
        out << YAML::Key << "A" << YAML::Value << f.A;
        out << YAML::Key << "B1" << YAML::Value;
        emit_vec(out, f.B1);
        out << YAML::Key << "B2" << YAML::Value;
        emit_vec(out, f.B2);
        out << YAML::Key << "C" << YAML::Value;
        emit_vec(out, f.C);
        out << YAML::Key << "K" << YAML::Value << f.K;
        out << YAML::EndMap;
      }
      out << YAML::EndSeq << YAML::EndMap;
    }
  }
  if (cfg.market) {
    const MarketSection& m = *cfg.market;
    out << YAML::Key << "market" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "y1" << YAML::Value << m.y1;
    out << YAML::Key << "y2" << YAML::Value << m.y2;
    out << YAML::Key << "constraint" << YAML::Value << constraint_name(m.constraint);
    out << YAML::Key << "per_regime" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : m.per_regime) {
      out << YAML::BeginMap;
      out << YAML::Key << "r" << YAML::Value << p.r;
      out << YAML::Key << "mu1" << YAML::Value << p.mu1;
      out << YAML::Key << "mu2" << YAML::Value << p.mu2;
      out << YAML::Key << "sigma1" << YAML::Value;
      emit_vec(out, p.sigma1);
      out << YAML::Key << "sigma2" << YAML::Value;
      emit_vec(out, p.sigma2);
      out << YAML::Key << "R1" << YAML::Value << p.R1;
      out << YAML::Key << "R2" << YAML::Value << p.R2;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }

  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "steps" << YAML::Value << cfg.steps << YAML::EndMap;
  out << YAML::Key << "monte_carlo" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "paths" << YAML::Value << cfg.paths;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "workers" << YAML::Value << cfg.workers << YAML::EndMap;
  const auto& v = cfg.verification;
  out << YAML::Key << "verification" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "perturbations" << YAML::Value << v.perturbations;
  out << YAML::Key << "perturbation_scale" << YAML::Value << v.perturbation_scale;
  out << YAML::Key << "perturbation_seed" << YAML::Value << v.perturbation_seed;
  out << YAML::Key << "truncation_levels" << YAML::Value << YAML::Flow << v.truncation_levels;
  out << YAML::Key << "certify_stride" << YAML::Value << v.certify_stride;
  out << YAML::Key << "basis_degree" << YAML::Value << v.basis_degree;
  out << YAML::Key << "soft_sigma" << YAML::Value << v.soft_sigma;
  out << YAML::Key << "hard_sigma" << YAML::Value << v.hard_sigma;
  out << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "directory" << YAML::Value << cfg.output_dir << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

GameModel build_model(const ScenarioConfig& cfg) {
  if (!cfg.game) fail(ErrorCode::ConfigError, "scenario has no game section");
  const GameSection& g = *cfg.game;
  const TimeGrid grid = cfg.grid();
  GameModel::Table table(grid.nodes(), g.per_regime);
  return GameModel(g.dims, RegimeGenerator(cfg.generator), grid, std::move(table), g.G, cfg.x0,
                   cfg.i0, g.cone1.build(g.dims.m1), g.cone2.build(g.dims.m2), g.loadings);
}

MarketSpec build_market(const ScenarioConfig& cfg) {
  if (!cfg.market) fail(ErrorCode::ConfigError, "scenario has no market section");
  const MarketSection& m = *cfg.market;
  return constant_market(RegimeGenerator(cfg.generator), cfg.grid(), m.per_regime, m.y1, m.y2,
                         cfg.i0, m.constraint);
}

void validate_config(const ScenarioConfig& cfg) {
  if (static_cast<bool>(cfg.game) == static_cast<bool>(cfg.market))
    fail(ErrorCode::ConfigError, "exactly one of the game or market sections is required");
  if (cfg.paths < 1) fail(ErrorCode::ConfigError, "monte_carlo.paths must be >= 1");
  if (cfg.workers < 0) fail(ErrorCode::ConfigError, "monte_carlo.workers must be >= 0");
  try {
    if (cfg.game)
      build_model(cfg);
    else
      build_market(cfg);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
}

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string TextTable::str() const {
  std::ostringstream os;
  for (size_t c = 0; c < columns.size(); ++c) os << (c ? " " : "") << columns[c];
  os << "\n";
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c) os << (c ? " " : "") << format_number(row[c]);
    os << "\n";
  }
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::ConfigError, "cannot write '" + path + "'");
  out << content;
}

}  // namespace sregame

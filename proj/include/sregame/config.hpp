#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sregame/model.hpp"
#include "sregame/portfolio.hpp"

namespace sregame {

/// Cone as written in the file; rays are kept verbatim (one ray per entry).
struct ConeConfig {
  ConeKind kind = ConeKind::FullSpace;
  Mat rays;

  ConeSpec build(int dim) const;
};

/// Constant-in-time game coefficients per regime.
struct GameSection {
  Dimensions dims;
  std::vector<NodeCoefficients> per_regime;
  std::vector<double> G;
  ConeConfig cone1, cone2;
  std::optional<std::vector<FactorLoading>> loadings;
};

struct MarketSection {
  std::vector<MarketPoint> per_regime;
  double y1 = 1.0, y2 = 1.0;
  ShortConstraint constraint = ShortConstraint::None;
};

struct VerificationConfig {
  int perturbations = 5;         // per target (u1 and beta2)
  double perturbation_scale = 0.2;
  std::uint64_t perturbation_seed = 7;
  std::vector<int> truncation_levels;  // empty skips the truncated sequence
  int certify_stride = 0;
  int basis_degree = 2;
  double soft_sigma = 3.0;  // stderr multiples for soft / hard Monte Carlo verdicts
  double hard_sigma = 5.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double horizon = 1.0;
  double x0 = 1.0;
  int i0 = 0;
  Mat generator = Mat::Zero(1, 1);
  std::optional<GameSection> game;
  std::optional<MarketSection> market;
  int steps = 100;
  std::int64_t paths = 10000;
  std::uint64_t seed = 1;
  int workers = 1;
  VerificationConfig verification;
  std::string output_dir = "out";

  TimeGrid grid() const { return TimeGrid(horizon, steps); }
};

ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& text);
std::string serialize_config(const ScenarioConfig& cfg);

/// Checks the one-of game/market rule and builds the model to surface shape errors.
void validate_config(const ScenarioConfig& cfg);

GameModel build_model(const ScenarioConfig& cfg);
MarketSpec build_market(const ScenarioConfig& cfg);

/// Plain columnar text: a one-line header, then rows printed with 17 significant digits.
struct TextTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
  std::string str() const;
};

std::string format_number(double v);
void write_file(const std::string& path, const std::string& content);

}  // namespace sregame

#include <string>

#include <gtest/gtest.h>

#include "kdsim/scenario_io.hpp"
#include "oracles.hpp"

using namespace kdsim;

namespace {

const std::string minimal = R"(seed = 5
[electron]
kinetic_energy_ev = 20000
pulse_fwhm_s = 890e-15
beam_sigma_x_m = 10e-6
beam_sigma_y_m = 10e-6
[laser]
wavelength_m = 1030e-9
pulse_fwhm_1_s = 220e-15
pulse_fwhm_2_s = 700e-15
waist_m = 10e-6
rep_rate_hz = 1e6
beta_max = 9
[geometry]
grating_to_focus_m = 12e-3
slit_width_m = 70e-9
spot_fwhm_m = 20e-9
)";

std::string replace(std::string text, const std::string& from, const std::string& to)
{
  const auto pos = text.find(from);
  if (pos == std::string::npos)
    throw std::logic_error("test setup: '" + from + "' not found");
  return text.replace(pos, from.size(), to);
}

// Field path reported for a scenario that fails to parse.
std::string failing_field(const std::string& text)
{
  try {
    parse_scenario_text(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string scenario_path(const std::string& name)
{
  return std::string(KDSIM_SOURCE_DIR) + "/scenarios/" + name;
}

} // namespace

TEST(Scenario, ParsesMinimalFile)
{
  const Scenario s = parse_scenario_text(minimal);
  EXPECT_EQ(s.seed, 5u);
  EXPECT_EQ(s.electron.kinetic_energy_ev, 20000.0);
  EXPECT_EQ(s.electron.arrival_offset_s, 0.0);
  EXPECT_EQ(s.laser.beta_max, 9.0);
  EXPECT_FALSE(s.laser.avg_power_w.has_value());
  EXPECT_FALSE(s.numerics.max_order.has_value());
  EXPECT_FALSE(s.numerics.grid_step_m.has_value());
  EXPECT_EQ(s.numerics.quadrature_tolerance, 1e-9);
  EXPECT_EQ(s.geometry.spot_fwhm_m, 20e-9);
}

TEST(Scenario, CommentsAndWhitespace)
{
  const std::string text = "# header\n\n" + replace(minimal, "waist_m = 10e-6", "  waist_m\t=  10e-6   # 1/e^2 radius");
  EXPECT_EQ(parse_scenario_text(text).laser.waist_m, 10e-6);
}

TEST(Scenario, NumericsSection)
{
  const Scenario s = parse_scenario_text(minimal + "[numerics]\nmax_order = 40\nquadrature_tolerance = 1e-10\n"
                                                   "grid_step_m = 5e-9\n");
  EXPECT_EQ(s.numerics.max_order, 40);
  EXPECT_EQ(s.numerics.quadrature_tolerance, 1e-10);
  EXPECT_EQ(s.numerics.grid_step_m, 5e-9);
  EXPECT_FALSE(parse_scenario_text(minimal + "[numerics]\nmax_order = auto\n").numerics.max_order.has_value());
}

TEST(Scenario, UnknownKeysAreErrors)
{
  EXPECT_EQ(failing_field(replace(minimal, "waist_m", "waist_um")), "laser.waist_um");
  EXPECT_EQ(failing_field(minimal + "[optics]\n"), "optics");
  EXPECT_EQ(failing_field("colour = blue\n" + minimal), "colour");
}

TEST(Scenario, RepeatedAndMissingKeys)
{
  EXPECT_EQ(failing_field(minimal + "[laser]\nwaist_m = 3e-6\n"), "laser.waist_m");
  EXPECT_EQ(failing_field(replace(minimal, "slit_width_m = 70e-9\n", "")), "geometry.slit_width_m");
  EXPECT_EQ(failing_field(replace(minimal, "rep_rate_hz = 1e6", "rep_rate_hz =")), "laser.rep_rate_hz");
}

TEST(Scenario, MalformedLines)
{
  EXPECT_EQ(failing_field(replace(minimal, "[laser]", "[laser")), "line 7");
  EXPECT_EQ(failing_field(replace(minimal, "waist_m = 10e-6", "waist_m 10e-6")), "line 11");
  EXPECT_EQ(failing_field(replace(minimal, "waist_m = 10e-6", "waist_m = 10 um")), "laser.waist_m");
  EXPECT_EQ(failing_field(replace(minimal, "seed = 5", "seed = -5")), "seed");
  EXPECT_EQ(failing_field(minimal + "[numerics]\nmax_order = 2.5\n"), "numerics.max_order");
}

TEST(Scenario, PhysicalQuantitiesMustBePositive)
{
  EXPECT_EQ(failing_field(replace(minimal, "kinetic_energy_ev = 20000", "kinetic_energy_ev = 0")),
            "electron.kinetic_energy_ev");
  EXPECT_EQ(failing_field(replace(minimal, "waist_m = 10e-6", "waist_m = -1e-6")), "laser.waist_m");
  EXPECT_EQ(failing_field(replace(minimal, "beta_max = 9", "beta_max = -1")), "laser.beta_max");
  EXPECT_EQ(failing_field(replace(minimal, "spot_fwhm_m = 20e-9", "spot_fwhm_m = nan")), "geometry.spot_fwhm_m");
  EXPECT_EQ(failing_field(minimal + "[numerics]\nquadrature_tolerance = 0\n"), "numerics.quadrature_tolerance");
  EXPECT_NO_THROW(parse_scenario_text(replace(minimal, "beta_max = 9", "beta_max = 0")));
}

TEST(Scenario, ExactlyOneCouplingSource)
{
  EXPECT_EQ(failing_field(replace(minimal, "beta_max = 9\n", "")), "laser.avg_power_w");
  EXPECT_EQ(failing_field(replace(minimal, "beta_max = 9", "beta_max = 9\navg_power_w = 0.3")), "laser.avg_power_w");
  const Scenario s = parse_scenario_text(replace(minimal, "beta_max = 9", "avg_power_w = 0.3"));
  EXPECT_EQ(s.laser.avg_power_w, 0.3);
}

TEST(Scenario, NarrowBeamWarning)
{
  Scenario s = oracle::incoherent_scenario();
  EXPECT_TRUE(validate(s).empty());
  s.electron.beam_sigma_x_m = 0.1e-6; // 0.24 um FWHM < 0.515 um period
  const auto w = validate(s);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("period"), std::string::npos);
}

TEST(Scenario, FormatRoundTrips)
{
  Scenario s = parse_scenario_text(minimal + "[numerics]\nmax_order = 33\ngrid_step_m = 2.5e-9\n");
  s.electron.arrival_offset_s = 1.25e-13;
  s.laser.pulse_fwhm_1_s = 0.1 + 0.2; // not exactly representable in short decimal form
  std::string text;
  for (const auto& line : format_scenario(s))
    text += line + "\n";
  const Scenario back = parse_scenario_text(text);
  EXPECT_EQ(format_scenario(back), format_scenario(s));
  EXPECT_EQ(back.laser.pulse_fwhm_1_s, s.laser.pulse_fwhm_1_s);
  EXPECT_EQ(back.electron.arrival_offset_s, s.electron.arrival_offset_s);
  EXPECT_EQ(back.numerics.max_order, 33);
  EXPECT_EQ(back.seed, s.seed);
}

TEST(Scenario, ShippedScenariosLoad)
{
  for (const char* name : {"incoherent_20kev.ini", "coherent_30kev.ini", "coherent_30kev_power.ini"}) {
    const Scenario s = load_scenario(scenario_path(name));
    EXPECT_TRUE(validate(s).empty()) << name;
    const Model m = build_model(s);
    EXPECT_GT(m.beta_max, 0.0) << name;
  }
  const Scenario inc = load_scenario(scenario_path("incoherent_20kev.ini"));
  const Scenario ref = oracle::incoherent_scenario(9.0);
  EXPECT_EQ(inc.electron.pulse_fwhm_s, ref.electron.pulse_fwhm_s);
  EXPECT_EQ(inc.laser.beta_max, ref.laser.beta_max);
  EXPECT_THROW(load_scenario(scenario_path("missing.ini")), ConfigError);
}

TEST(Scenario, PowerAndBetaConfigurationsAgree)
{
  Scenario by_beta = oracle::coherent_scenario(4.52);
  const Model a = build_model(by_beta);
  Scenario by_power = by_beta;
  by_power.laser.beta_max.reset();
  by_power.laser.avg_power_w = 4.52 / a.beta_per_watt;
  const Model b = build_model(by_power);
  EXPECT_NEAR(b.beta_max / 4.52, 1.0, 1e-12);
  EXPECT_NEAR(a.beta_per_watt / b.beta_per_watt, 1.0, 1e-15);
  for (double y : {0.0, 3e-6})
    for (double t : {0.0, 2e-13})
      EXPECT_NEAR(a.field(0, y, t) / b.field(0, y, t), 1.0, 1e-12);
}

TEST(Scenario, ResolvedOrder)
{
  Scenario s = oracle::incoherent_scenario(9.0);
  EXPECT_EQ(resolved_max_order(s, 9.0), truncation_rule(9.0));
  s.numerics.max_order = 50;
  EXPECT_EQ(resolved_max_order(s, 9.0), 50);
  EXPECT_EQ(ensemble_options(s).tolerance, s.numerics.quadrature_tolerance);
}

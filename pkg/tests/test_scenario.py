import math

import pytest

from vibromanip import scenario as scn
from vibromanip.controller import GoalState
from vibromanip.errors import ConfigError
from vibromanip.forces import min_slip_frequency
from vibromanip.geometry import Disk, Rectangle, grip_direction, max_grasp_radius

HZ = 2 * math.pi
BUNDLED = ["cellphone", "credit_card", "disk", "rectangle", "ruler"]

MINIMAL = """\
name = "mini"

[object]
shape = "rectangle"
width = 0.1
height = 0.05
mass = 0.02

[erm]
eccentric_mass = 0.0005
link_length = 0.0015

[contact]
mu_static = 0.3
mu_kinetic = 0.27
grip_preload = 1.0
finger_radius = 0.02
"""


def test_bundled_names():
    assert scn.bundled_names() == BUNDLED


@pytest.mark.parametrize("name", BUNDLED)
def test_round_trip_every_bundled_scenario(name):
    sc = scn.load(name)
    again = scn.loads(scn.dumps(sc))
    assert again == sc
    # and the serialized form is a fixed point
    assert scn.dumps(again) == scn.dumps(sc)


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_are_feasible(name):
    sc = scn.load(name)
    c = sc.controller
    # both drives slip at the rotation radius and at the far edge of the goal region
    for r in (0.0, c.r_c, 0.8 * sc.workspace_radius):
        assert min_slip_frequency(sc.erm, sc.contact, sc.geometry, r) < c.omega_translate
    assert min_slip_frequency(sc.erm, sc.contact, sc.geometry, c.r_c) < c.omega_rotate


def test_disk_scenario_values(disk):
    assert isinstance(disk.geometry.shape, Disk)
    assert disk.geometry.shape.radius == 0.1
    assert disk.controller.omega_rotate == pytest.approx(168 * HZ)
    assert disk.controller.omega_translate == pytest.approx(240 * HZ)
    assert disk.controller.r_c == 0.00775
    assert disk.controller.eps_r == 0.001
    assert disk.controller.eps_psi == pytest.approx(math.radians(1))
    assert disk.sim.sensor_pos_noise_std == 0.0015
    assert disk.geometry.inertia == pytest.approx(0.5 * disk.geometry.mass * 0.01)


def test_minimal_file_takes_defaults():
    sc = scn.loads(MINIMAL)
    assert isinstance(sc.geometry.shape, Rectangle)
    assert sc.controller.duty_fraction == 0.5
    assert sc.goals == [] and sc.sampling == scn.GoalSampling()
    assert sc.workspace_radius == pytest.approx(0.025)


def test_overrides_with_provenance():
    sc = scn.load("disk", ["controller.duty_fraction=1.0", "sim.rng_seed=42", "name=other"])
    assert sc.controller.duty_fraction == 1.0
    assert sc.sim.rng_seed == 42
    assert sc.name == "other"
    assert sc.provenance == [
        {"key": "controller.duty_fraction", "value": 1.0, "previous": 0.5, "source": "--set"},
        {"key": "sim.rng_seed", "value": 42, "previous": 0, "source": "--set"},
        {"key": "name", "value": "other", "previous": "disk", "source": "--set"},
    ]
    # provenance does not take part in equality
    assert scn.load("disk", ["controller.duty_fraction=1.0", "sim.rng_seed=42", "name=other"]) == sc


def test_override_parsing():
    assert scn.parse_override("a.b=3") == ("a.b", 3)
    assert scn.parse_override("a.b = 2.5") == ("a.b", 2.5)
    assert scn.parse_override("object.shape=disk") == ("object.shape", "disk")
    assert scn.parse_override("x.y=true") == ("x.y", True)
    with pytest.raises(ConfigError):
        scn.parse_override("novalue")


@pytest.mark.parametrize("item", ["controller.nope=1", "nosection.x=1", "a.b.c=1", "bare=1"])
def test_unknown_override_keys(item):
    with pytest.raises(ConfigError):
        scn.load("disk", [item])


def _line_of(text, needle):
    return next(i for i, line in enumerate(text.splitlines(), 1) if line.startswith(needle))


def test_invalid_value_reports_line_and_field():
    text = MINIMAL.replace("mu_kinetic = 0.27", "mu_kinetic = 0.35")
    with pytest.raises(ConfigError) as info:
        scn.loads(text)
    err = info.value
    assert err.field == "contact.mu_kinetic"
    assert err.line == _line_of(text, "mu_kinetic")
    assert str(err).startswith(f"line {err.line}, contact.mu_kinetic:")


def test_type_error_reports_line():
    text = MINIMAL.replace("mass = 0.02", 'mass = "heavy"')
    with pytest.raises(ConfigError) as info:
        scn.loads(text)
    assert info.value.line == _line_of(text, "mass")


def test_unknown_key_and_missing_section():
    with pytest.raises(ConfigError) as info:
        scn.loads(MINIMAL + "\n[sim]\ndtt = 0.001\n")
    assert "dtt" in str(info.value)
    assert info.value.line is not None
    with pytest.raises(ConfigError):
        scn.loads(MINIMAL.split("[contact]")[0])


def test_syntax_error_has_line():
    with pytest.raises(ConfigError) as info:
        scn.loads(MINIMAL + "\n[sim\n")
    assert info.value.line is not None


def test_missing_scenario_file():
    with pytest.raises(ConfigError):
        scn.load("/nonexistent/file.toml")


def test_explicit_goals_and_admissibility():
    text = MINIMAL + "\n[[goal]]\nr = 0.01\nphi = 0.5\npsi = 0.0\n"
    sc = scn.loads(text)
    assert sc.goal_list() == [GoalState(0.01, 0.5, 0.0)]
    bad = MINIMAL + "\n[[goal]]\nr = 0.04\nphi = 0.0\npsi = 1.5707963\n"
    with pytest.raises(ConfigError):
        scn.loads(bad)


def test_sampled_goals_are_admissible_and_reproducible(disk):
    s = scn.GoalSampling(count=200, seed=3)
    a = scn.sample_goals(disk, s, 3)
    assert a == scn.sample_goals(disk, s, 3)
    assert a != scn.sample_goals(disk, s, 4)
    hi = 0.8 * disk.workspace_radius
    assert all(0.01 <= g.r_g <= hi for g in a)
    rect = scn.load("ruler")
    goals = scn.sample_goals(rect, scn.GoalSampling(count=200), 0)
    for g in goals:
        assert g.r_g < max_grasp_radius(rect.geometry, grip_direction(g.phi_g, g.psi_g))


def test_with_seed(disk):
    sc = disk.with_seed(9)
    assert sc.sim.rng_seed == 9 and sc.sampling.seed == 9
    assert disk.sim.rng_seed == 0


def test_goal_sampling_validation():
    with pytest.raises(ConfigError):
        scn.GoalSampling(count=0)
    with pytest.raises(ConfigError):
        scn.GoalSampling(r_min=0.05, r_max=0.01)

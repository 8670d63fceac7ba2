"""Config grammar: parsing, overrides, rejection, and scene building."""

import numpy as np
import pytest

from mocomp.errors import ConfigError, ParseError
from mocomp.sceneconfig import build_scene, load_config, parse_override

CUBE_CSV = "x,y,z\n" + "".join(
    f"{0.7 + 0.1 * i},{0.7 + 0.1 * j},{0.7 + 0.1 * k}\n"
    for i in range(2)
    for j in range(2)
    for k in range(2)
)

BASE_SCENE = """
[grid]
dims = [16, 16, 16]
spacing = 0.1

[material.rubber]
young_modulus = 1e4
poisson_ratio = 0.3
viscosity = 0.0
density = 2.0

[object.ball]
cloud = "cube.csv"
material = "rubber"

[sim]
dt = 1e-3
steps = 10
frame_stride = 2
"""


def write_scene(tmp_path, body=BASE_SCENE, cloud=CUBE_CSV):
    (tmp_path / "cube.csv").write_text(cloud)
    path = tmp_path / "scene.toml"
    path.write_text(body)
    return path


class TestParseOverride:
    def test_float_value(self):
        assert parse_override("sim.dt=0.0005") == (["sim", "dt"], 0.0005)

    def test_int_value(self):
        keys, value = parse_override("sim.steps=42")
        assert keys == ["sim", "steps"] and value == 42 and isinstance(value, int)

    def test_quoted_string(self):
        assert parse_override('inpaint.denoiser="drift"')[1] == "drift"

    def test_bare_string_fallback(self):
        assert parse_override("scenario.foreground=rubber ball")[1] == "rubber ball"

    def test_bool(self):
        assert parse_override("boundary.floor=true")[1] is True

    def test_list_value(self):
        assert parse_override("gravity.vector=[0.0, 0.0, -1.0]")[1] == [0.0, 0.0, -1.0]

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="block.key=value"):
            parse_override("sim.dt")

    def test_undotted_key(self):
        with pytest.raises(ConfigError, match="dotted path"):
            parse_override("dt=0.5")


class TestLoadConfig:
    def test_full_round_trip(self, tmp_path):
        config = load_config(write_scene(tmp_path))
        assert config.grid.dims == (16, 16, 16)
        assert config.grid.spacing == pytest.approx(0.1)
        assert config.sim.dt == pytest.approx(1e-3)
        assert config.sim.steps == 10
        assert config.sim.frame_stride == 2
        assert config.gravity == (0.0, 0.0, -9.8)
        rubber = config.materials["rubber"]
        assert rubber.young_modulus == pytest.approx(1e4)
        assert rubber.poisson_ratio == pytest.approx(0.3)
        assert rubber.density == pytest.approx(2.0)
        (ball,) = config.objects
        assert ball.name == "ball"
        assert ball.material == "rubber"
        assert ball.cloud == tmp_path / "cube.csv"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            load_config(tmp_path / "absent.toml")

    def test_toml_syntax_error_cites_location(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[grid\ndims = [16, 16, 16]\n")
        with pytest.raises(ParseError, match=r"line 1"):
            load_config(path)

    @pytest.mark.parametrize("key", ["lame_lambda", "lame_mu", "lambda", "mu"])
    def test_derived_lame_keys_rejected(self, tmp_path, key):
        body = BASE_SCENE.replace(
            "young_modulus = 1e4", f'young_modulus = 1e4\n"{key}" = 5.0'
        )
        with pytest.raises(ConfigError, match="derived Lame parameters"):
            load_config(write_scene(tmp_path, body))

    def test_unknown_key_names_block_and_field(self, tmp_path):
        body = BASE_SCENE.replace("dt = 1e-3", "dt = 1e-3\ntimestep = 2")
        with pytest.raises(ConfigError, match=r"\[sim\] unknown key\(s\): timestep"):
            load_config(write_scene(tmp_path, body))

    def test_unknown_top_level_table(self, tmp_path):
        body = BASE_SCENE + "\n[solver]\nkind = 'implicit'\n"
        with pytest.raises(ConfigError, match="unknown top-level table.*solver"):
            load_config(write_scene(tmp_path, body))

    def test_override_beats_file_value(self, tmp_path):
        path = write_scene(tmp_path)
        config = load_config(path, overrides=("sim.dt=0.0005",))
        assert config.sim.dt == pytest.approx(5e-4)

    def test_override_is_validated_like_file_values(self, tmp_path):
        path = write_scene(tmp_path)
        with pytest.raises(ConfigError, match=r"\[sim\] dt"):
            load_config(path, overrides=("sim.dt=-1.0",))

    def test_missing_cloud_file(self, tmp_path):
        path = tmp_path / "scene.toml"
        path.write_text(BASE_SCENE)  # cube.csv not written
        with pytest.raises(ConfigError, match=r"cloud.*does not exist"):
            load_config(path)

    def test_undefined_material_reference(self, tmp_path):
        body = BASE_SCENE.replace('material = "rubber"', 'material = "steel"')
        with pytest.raises(ConfigError, match="'steel' is not defined"):
            load_config(write_scene(tmp_path, body))

    def test_objects_require_grid(self, tmp_path):
        body = "\n".join(
            line for line in BASE_SCENE.splitlines() if line not in
            ("[grid]", "dims = [16, 16, 16]", "spacing = 0.1")
        )
        with pytest.raises(ConfigError, match=r"\[grid\] is required"):
            load_config(write_scene(tmp_path, body))

    def test_sim_validation(self, tmp_path):
        for override, message in [
            ("sim.dt=0.0", r"\[sim\] dt"),
            ("sim.steps=-1", r"\[sim\] steps"),
            ("sim.frame_stride=0", r"\[sim\] frame_stride"),
        ]:
            with pytest.raises(ConfigError, match=message):
                load_config(write_scene(tmp_path), overrides=(override,))

    def test_boundary_and_gravity(self, tmp_path):
        body = BASE_SCENE + (
            "\n[boundary]\nfloor = 'sticky'\nwalls = 'sticky'\nlayers = 2\n"
            "\n[gravity]\nvector = [0.0, 0.0, -1.0]\n"
        )
        config = load_config(write_scene(tmp_path, body))
        assert config.boundary.walls == "sticky"
        assert config.boundary.layers == 2
        assert config.gravity == (0.0, 0.0, -1.0)

    def test_bad_boundary_kind(self, tmp_path):
        body = BASE_SCENE + "\n[boundary]\nfloor = 'bouncy'\n"
        with pytest.raises(ConfigError, match=r"\[boundary\]"):
            load_config(write_scene(tmp_path, body))

    def test_force_block(self, tmp_path):
        body = BASE_SCENE + (
            "\n[force.wind]\nkind = 'uniform_wind'\nvector = [1.0, 0.0, 0.0]\n"
            "window = [0.0, 0.5]\nregion = { lo = [0.0, 0.0, 0.0], hi = [1.0, 1.0, 1.0] }\n"
        )
        config = load_config(write_scene(tmp_path, body))
        (wind,) = config.forces
        assert wind.kind == "uniform_wind"
        assert wind.vector == (1.0, 0.0, 0.0)
        assert wind.window == (0.0, 0.5)
        assert wind.region.lo == (0.0, 0.0, 0.0)

    def test_scenario_block(self, tmp_path):
        body = BASE_SCENE + (
            "\n[scenario]\nforeground = 'a rubber ball'\nbackground = 'a wooden floor'\n"
            "tags = ['deformable_solid', 'mechanical_force']\n"
            "region_tags = { '0' = ['sky'], '1' = ['wall'] }\n"
        )
        config = load_config(write_scene(tmp_path, body))
        assert config.scenario.foreground == "a rubber ball"
        assert config.scenario.tags == ("deformable_solid", "mechanical_force")
        assert config.scenario.region_tags == {0: ("sky",), 1: ("wall",)}

    def test_inpaint_block(self, tmp_path):
        (tmp_path / "bg.png").write_bytes(b"")
        (tmp_path / "fg.png").write_bytes(b"")
        body = BASE_SCENE + (
            "\n[inpaint]\nbackground = 'bg.png'\nforeground = 'fg.png'\n"
            "frames = 4\nsteps = 10\ndenoiser = 'linear-gaussian'\n"
            "denoiser_options = { gain = 0.8, noise = 0.1 }\nschedule_floor = 1e-3\n"
        )
        config = load_config(write_scene(tmp_path, body))
        spec = config.inpaint
        assert spec.background == tmp_path / "bg.png"
        assert spec.frames == 4 and spec.steps == 10
        assert spec.denoiser == "linear-gaussian"
        assert spec.denoiser_options == {"gain": 0.8, "noise": 0.1}
        assert spec.schedule_floor == pytest.approx(1e-3)

    def test_inpaint_validation(self, tmp_path):
        for extra, message in [
            ("frames = 0", r"\[inpaint\] frames"),
            ("steps = 0", r"\[inpaint\] steps"),
            ("schedule_floor = 1.5", r"\[inpaint\] schedule_floor"),
        ]:
            body = BASE_SCENE + f"\n[inpaint]\n{extra}\n"
            with pytest.raises(ConfigError, match=message):
                load_config(write_scene(tmp_path, body))

    def test_optimize_block(self, tmp_path):
        ref = tmp_path / "reference"
        ref.mkdir()
        body = BASE_SCENE + (
            "\n[optimize]\nreference = 'reference'\nparts = [0, 1]\n"
            "iters = 5\nstep_size = 0.05\nsim_steps = 20\nsim_dt = 1e-3\nframe_stride = 4\n"
        )
        config = load_config(write_scene(tmp_path, body))
        spec = config.optimize
        assert spec.reference == ref
        assert spec.parts == (0, 1)
        assert spec.settings.iters == 5
        assert spec.settings.step_size == pytest.approx(0.05)
        assert spec.settings.sim_steps == 20
        assert spec.settings.frame_stride == 4

    def test_optimize_missing_reference_dir(self, tmp_path):
        body = BASE_SCENE + "\n[optimize]\nreference = 'nowhere'\n"
        with pytest.raises(ConfigError, match="nowhere.*does not exist"):
            load_config(write_scene(tmp_path, body))


class TestBuildScene:
    def test_single_object_defaults(self, tmp_path):
        scene = build_scene(load_config(write_scene(tmp_path)))
        assert len(scene.particles) == 8
        assert scene.particles.labels() == (0,)
        assert scene.materials.labels() == (0,)
        assert scene.dt == pytest.approx(1e-3)
        # mass is rebound to the material's density at insertion
        np.testing.assert_allclose(
            scene.particles.mass, 2.0 * scene.particles.volume0
        )

    def test_placement_applied(self, tmp_path):
        body = BASE_SCENE.replace(
            'material = "rubber"',
            'material = "rubber"\ntranslate = [0.1, 0.0, 0.0]\ndrop_height = 0.2\n'
            "scale = 0.5\nvelocity = [0.0, 0.0, -1.0]",
        )
        scene = build_scene(load_config(write_scene(tmp_path, body)))
        expected_x = 0.5 * 0.7 + 0.1
        assert scene.particles.x[:, 0].min() == pytest.approx(expected_x)
        assert scene.particles.x[:, 2].min() == pytest.approx(0.5 * 0.7 + 0.2)
        np.testing.assert_allclose(scene.particles.v, [[0.0, 0.0, -0.5]] * 8)

    def test_two_objects_lowest_unused_label(self, tmp_path):
        body = BASE_SCENE + (
            "\n[object.block]\ncloud = 'cube2.csv'\nmaterial = 'rubber'\n"
        )
        (tmp_path / "cube2.csv").write_text(
            CUBE_CSV.replace("0.7", "0.4").replace("0.8", "0.5")
        )
        scene = build_scene(load_config(write_scene(tmp_path, body)))
        assert scene.particles.labels() == (0, 1)
        assert len(scene.particles) == 16

    def test_explicit_label_respected(self, tmp_path):
        body = BASE_SCENE.replace('material = "rubber"', 'material = "rubber"\nlabel = 0')
        scene = build_scene(load_config(write_scene(tmp_path, body)))
        assert scene.particles.labels() == (0,)

    def test_labels_file_with_part_materials(self, tmp_path):
        (tmp_path / "parts.txt").write_text("0\n0\n0\n0\n1\n1\n1\n1\n")
        body = BASE_SCENE.replace(
            'material = "rubber"',
            "material = \"rubber\"\nlabels_file = 'parts.txt'\n"
            "part_materials = { '1' = 'soft' }",
        ) + (
            "\n[material.soft]\nyoung_modulus = 1e3\npoisson_ratio = 0.4\n"
            "viscosity = 0.0\ndensity = 1.0\n"
        )
        scene = build_scene(load_config(write_scene(tmp_path, body)))
        assert scene.particles.labels() == (0, 1)
        assert scene.materials.get(0).young_modulus == pytest.approx(1e4)
        assert scene.materials.get(1).young_modulus == pytest.approx(1e3)
        # per-part mass rebinding follows each part's own density
        part1 = scene.particles.part == 1
        np.testing.assert_allclose(
            scene.particles.mass[part1], 1.0 * scene.particles.volume0[part1]
        )
        np.testing.assert_allclose(
            scene.particles.mass[~part1], 2.0 * scene.particles.volume0[~part1]
        )

    def test_no_grid_refuses(self, tmp_path):
        path = tmp_path / "scene.toml"
        path.write_text("[sim]\ndt = 1e-3\n")
        with pytest.raises(ConfigError, match="no \\[grid\\] table"):
            build_scene(load_config(path))

    def test_out_of_margin_placement_is_a_config_error_story(self, tmp_path):
        body = BASE_SCENE.replace(
            'material = "rubber"', 'material = "rubber"\ntranslate = [5.0, 0.0, 0.0]'
        )
        config = load_config(write_scene(tmp_path, body))
        with pytest.raises(Exception, match="margin"):
            build_scene(config)

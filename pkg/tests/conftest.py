import numpy as np
import pytest

from nfsec.geometry import ReceiverGeometry, ScenarioGeometry
from nfsec.units import dbm_to_watts


def make_receiver(distance_m, azimuth_rad, n, wavelength_m):
    return ReceiverGeometry(distance_m, azimuth_rad, n, 0.5 * wavelength_m)


def make_scenario(freq_hz=2.8e9, num_ports=64, num_active=16, n_bob=8,
                  n_eve=8, d_bob=15.0, d_eve=5.0, azimuth_rad=np.pi / 4,
                  num_streams=4, num_rf=8, noise_dbm=-105.0):
    wavelength = 299_792_458.0 / freq_hz
    return ScenarioGeometry.create(
        carrier_freq_hz=freq_hz,
        num_ports=num_ports,
        num_active=num_active,
        bob=make_receiver(d_bob, azimuth_rad, n_bob, wavelength),
        eve=make_receiver(d_eve, azimuth_rad, n_eve, wavelength),
        noise_power_w=dbm_to_watts(noise_dbm),
        num_streams=num_streams,
        num_rf_chains=num_rf)


@pytest.fixture(scope="session")
def small_scenario():
    return make_scenario()


@pytest.fixture(scope="session")
def toy_scenario():
    # deliberately tiny: exhaustive subset checks stay cheap
    return make_scenario(num_ports=8, num_active=3, n_bob=2, n_eve=2,
                        num_streams=1, num_rf=2)


def random_whitened_pair(rng, n_rx_bob, n_rx_eve, n_ports, scale=1.0):
    """Generic complex Gaussian channel pair, already unit-noise."""
    def draw(rows):
        return scale * (rng.standard_normal((rows, n_ports))
                        + 1j * rng.standard_normal((rows, n_ports)))
    return draw(n_rx_bob), draw(n_rx_eve)


TOY_CFG = """\
scenario.num_ports = 8
scenario.num_active = 3
scenario.bob.num_elements = 2
scenario.eve.num_elements = 2
scenario.num_streams = 1
scenario.num_rf_chains = 2
sweep.power_dbm = 0,10
sweep.eve_distance_m = 4,6
power_dbm = 10
trials = 2
seed = 77
bcd.max_iters = 25
select.refit_iters = 6
select.final_iters = 15
fieldmap.restarts = 2
grid.x_min_m = 1
grid.x_max_m = 6
grid.num_x = 3
grid.y_min_m = 1
grid.y_max_m = 6
grid.num_y = 2
variants = fa-an-digital,fpa-an-digital,fa-an-hybrid
"""


def write_toy_config(tmp_path, **overrides):
    """Toy config file; overrides replace whole `key = value` lines."""
    lines = []
    for line in TOY_CFG.splitlines():
        key = line.split("=")[0].strip()
        if key in overrides:
            lines.append(f"{key} = {overrides.pop(key)}")
        else:
            lines.append(line)
    for key, value in overrides.items():
        lines.append(f"{key} = {value}")
    path = tmp_path / "toy.cfg"
    path.write_text("\n".join(lines) + "\n")
    return path

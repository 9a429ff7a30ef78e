"""Near-field line-of-sight channel synthesis for a fluid-antenna rail.

The transmitter is a rail of candidate port positions along the y axis,
centered at the origin. Receivers are uniform linear arrays parallel to
the rail, described by the range and azimuth of their center. Distances
carry both amplitude (spherical spreading) and phase, so wavefront
curvature is preserved; a Fresnel (quadratic) approximation of the exact
distance is available and is the default model for optimization work.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .units import SPEED_OF_LIGHT


def half_wavelength_aperture(n_elements: int, wavelength_m: float) -> float:
    """Aperture of an n-element array at half-wavelength pitch."""
    return 0.5 * (n_elements - 1) * wavelength_m


def centered_offsets(n: int, spacing_m: float) -> np.ndarray:
    """Signed positions of n uniformly spaced elements, centered on zero."""
    return (np.arange(n) - 0.5 * (n - 1)) * spacing_m


def rayleigh_distance(aperture_tx_m: float, aperture_rx_m: float,
                      wavelength_m: float) -> float:
    """Fresnel region boundary for a transmit/receive aperture pair."""
    if wavelength_m <= 0:
        raise ConfigurationError("wavelength must be positive")
    if aperture_tx_m < 0 or aperture_rx_m < 0:
        raise ConfigurationError("apertures must be nonnegative")
    return 2.0 * (aperture_tx_m + aperture_rx_m) ** 2 / wavelength_m


@dataclass(frozen=True)
class ReceiverGeometry:
    """A uniform linear receive array parallel to the rail.

    Args:
        distance_m: range from the rail center to the array center.
        azimuth_rad: angle of the array center off the rail normal (x axis).
        num_elements: element count.
        element_spacing_m: element pitch; may be 0 for a single element.
    """

    distance_m: float
    azimuth_rad: float
    num_elements: int
    element_spacing_m: float

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ConfigurationError("receiver distance must be positive")
        if self.num_elements < 1:
            raise ConfigurationError("receiver needs at least one element")
        if self.num_elements > 1 and self.element_spacing_m <= 0:
            raise ConfigurationError("element spacing must be positive")

    @property
    def xy(self) -> tuple[float, float]:
        return (self.distance_m * np.cos(self.azimuth_rad),
                self.distance_m * np.sin(self.azimuth_rad))

    def element_offsets(self) -> np.ndarray:
        return centered_offsets(self.num_elements, self.element_spacing_m)

    @property
    def aperture_m(self) -> float:
        return (self.num_elements - 1) * self.element_spacing_m


def probe_receiver(x_m: float, y_m: float) -> ReceiverGeometry:
    """Single isotropic element at a cartesian point, for field probing."""
    d = float(np.hypot(x_m, y_m))
    if d <= 0:
        raise ConfigurationError("probe point coincides with the rail center")
    return ReceiverGeometry(d, float(np.arctan2(y_m, x_m)), 1, 0.0)


@dataclass(frozen=True)
class ScenarioGeometry:
    """Full transmit rail plus the two receivers.

    The rail holds num_ports candidate positions at pitch port_spacing_m;
    num_active of them can be switched onto RF hardware at a time.
    noise_power_w is the per-element receiver noise variance, common to
    both receivers.
    """

    carrier_freq_hz: float
    num_ports: int
    num_active: int
    port_spacing_m: float
    bob: ReceiverGeometry
    eve: ReceiverGeometry
    noise_power_w: float
    num_streams: int
    num_rf_chains: int

    def __post_init__(self):
        if self.carrier_freq_hz <= 0:
            raise ConfigurationError("carrier frequency must be positive")
        if self.port_spacing_m <= 0:
            raise ConfigurationError("port spacing must be positive")
        if self.noise_power_w <= 0:
            raise ConfigurationError("noise power must be positive")
        if not (self.num_ports >= self.num_active >= self.num_streams >= 1):
            raise ConfigurationError(
                "need num_ports >= num_active >= num_streams >= 1, got "
                f"{self.num_ports}/{self.num_active}/{self.num_streams}")
        if not (self.num_streams <= self.num_rf_chains <= self.num_active):
            raise ConfigurationError(
                "need num_streams <= num_rf_chains <= num_active, got "
                f"{self.num_streams}/{self.num_rf_chains}/{self.num_active}")

    @classmethod
    def create(cls, carrier_freq_hz, num_ports, num_active, bob, eve,
               noise_power_w, num_streams, num_rf_chains,
               port_spacing_m=None):
        """Build a scenario, defaulting the rail pitch.

        By default the rail spans the same aperture a half-wavelength
        array of num_active elements would occupy, so fluid and fixed
        configurations compare at equal physical size.
        """
        if port_spacing_m is None:
            wavelength = SPEED_OF_LIGHT / carrier_freq_hz
            aperture = half_wavelength_aperture(num_active, wavelength)
            if num_ports < 2:
                raise ConfigurationError("default pitch needs num_ports >= 2")
            port_spacing_m = aperture / (num_ports - 1)
        return cls(carrier_freq_hz, num_ports, num_active, port_spacing_m,
                   bob, eve, noise_power_w, num_streams, num_rf_chains)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def rail_aperture_m(self) -> float:
        return (self.num_ports - 1) * self.port_spacing_m

    def port_offsets(self) -> np.ndarray:
        return centered_offsets(self.num_ports, self.port_spacing_m)


def _offset_grids(geometry: ScenarioGeometry, receiver: ReceiverGeometry):
    """Port/element offsets broadcast to an (elements, ports) difference."""
    dy_ports = geometry.port_offsets()
    dy_elems = receiver.element_offsets()
    return dy_elems[:, None] - dy_ports[None, :]


def exact_distance_matrix(geometry: ScenarioGeometry,
                          receiver: ReceiverGeometry) -> np.ndarray:
    """Exact port-to-element distances, shape (num_elements, num_ports)."""
    x, y = receiver.xy
    diff = _offset_grids(geometry, receiver)
    return np.sqrt(x * x + (y + diff) ** 2)


def exact_reference_distances(receiver: ReceiverGeometry) -> np.ndarray:
    """Exact rail-center-to-element distances, shape (num_elements,)."""
    x, y = receiver.xy
    return np.sqrt(x * x + (y + receiver.element_offsets()) ** 2)


def fresnel_distance_matrix(geometry: ScenarioGeometry,
                            receiver: ReceiverGeometry) -> np.ndarray:
    """Second-order expansion of the exact distances about the center range."""
    d = receiver.distance_m
    sin_t = np.sin(receiver.azimuth_rad)
    diff = _offset_grids(geometry, receiver)
    return d + sin_t * diff + diff ** 2 / (2.0 * d)


def fresnel_reference_distances(receiver: ReceiverGeometry) -> np.ndarray:
    d = receiver.distance_m
    sin_t = np.sin(receiver.azimuth_rad)
    dy = receiver.element_offsets()
    return d + sin_t * dy + dy ** 2 / (2.0 * d)


def exact_distance(geometry, receiver, element_index: int,
                   port_index: int) -> float:
    return float(exact_distance_matrix(geometry, receiver)[element_index,
                                                           port_index])


def fresnel_distance(geometry, receiver, element_index: int,
                     port_index: int) -> float:
    return float(fresnel_distance_matrix(geometry, receiver)[element_index,
                                                             port_index])


def channel_matrix(geometry: ScenarioGeometry, receiver: ReceiverGeometry,
                   model: str = "fresnel") -> np.ndarray:
    """Unwhitened LoS channel from every rail port to every element.

    Entry (n, l) has amplitude c / (4 pi f d_{n,l}) scaled by
    1/sqrt(num_elements), and phase set by the path-length excess of port
    l relative to the rail center, both under the requested distance
    model ("exact" or "fresnel").

    Returns:
        Complex array of shape (receiver.num_elements, geometry.num_ports).
    """
    if model == "exact":
        dists = exact_distance_matrix(geometry, receiver)
        refs = exact_reference_distances(receiver)
    elif model == "fresnel":
        dists = fresnel_distance_matrix(geometry, receiver)
        refs = fresnel_reference_distances(receiver)
    else:
        raise ConfigurationError(f"unknown distance model {model!r}")
    if not np.all(np.isfinite(dists)):
        raise NumericalError("non-finite port-to-element distance",
                             f"receiver at {receiver.xy}")
    if np.any(dists <= 0):
        raise ConfigurationError("receiver element coincides with a port")
    f = geometry.carrier_freq_hz
    amp = SPEED_OF_LIGHT / (4.0 * np.pi * f * dists)
    phase = 2.0 * np.pi * f * (dists - refs[:, None]) / SPEED_OF_LIGHT
    return amp * np.exp(-1j * phase) / np.sqrt(receiver.num_elements)


def whiten(channel: np.ndarray, noise_power_w: float) -> np.ndarray:
    """Scale a channel so the effective noise has unit variance."""
    if noise_power_w <= 0:
        raise ConfigurationError("noise power must be positive")
    return channel / np.sqrt(noise_power_w)


@dataclass(frozen=True)
class ChannelPair:
    """Noise-whitened Bob/Eve channels over the full rail."""

    h_bob: np.ndarray
    h_eve: np.ndarray
    model: str

    def restrict(self, support) -> tuple[np.ndarray, np.ndarray]:
        """Column-select both channels onto an active-port support."""
        idx = np.asarray(support, dtype=int)
        return self.h_bob[:, idx], self.h_eve[:, idx]


def channel_pair(geometry: ScenarioGeometry,
                 model: str = "fresnel") -> ChannelPair:
    h_bob = whiten(channel_matrix(geometry, geometry.bob, model),
                   geometry.noise_power_w)
    h_eve = whiten(channel_matrix(geometry, geometry.eve, model),
                   geometry.noise_power_w)
    return ChannelPair(h_bob, h_eve, model)

"""Flat key-value experiment configuration.

The file format is one `key = value` pair per line, with blank lines and
`#` comments ignored; no sections.  Unknown keys are rejected so typos fail
loudly.  Every run is seeded explicitly (no wall-clock seeding): the master
seed feeds fixed stream codes for mask, measurement noise, calibration,
probes, init noise, and denoiser channels.
"""

import math
from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


_PHANTOMS = ("shepp_logan", "piecewise_smooth", "random_wavelet_sparse")
_MASKS = ("point2d", "line2d")
_ALGORITHMS = ("dgec", "ec", "amp", "pnp_pgd", "pr_admm")
_DENOISERS = ("soft_threshold", "identity", "external")


@dataclass
class ExperimentConfig:
    # problem
    phantom: str = "random_wavelet_sparse"
    phantom_sparsity: float = 0.1
    height: int = 128
    width: int = 128
    coils: int = 1
    coil_support: str = "full"
    mask: str = "point2d"
    acceleration: float = 4.0
    density_exponent: float = 2.0
    calib_size: int = 12
    snr_db: float = 40.0
    # solver
    algorithm: str = "dgec"
    depth: int = 4
    max_iters: int = 20
    cg_iters: int = 10
    damping_rho: float = 0.3
    init_mode: str = "bhy_plus_noise"
    init_inflation: float = 10.0
    gamma_clip_lo: float = 1e-3
    gamma_clip_hi: float = 0.999
    conv_tol: float = 1e-5
    calib_images: int = 8
    # denoiser
    denoiser: str = "soft_threshold"
    threshold_policy: str = "sure"
    lam: float = 1.0
    ll_weight: float = 0.0
    k_channels: int = 1
    endpoint: str = ""
    # baseline knobs
    pgd_mu: float = 0.0          # 0 = beta^2 default
    admm_gamma: float = 1.0
    amp_beta_scale: float = 1.0  # < 1 slows AMP on non-random operators
    # randomness
    seed: int = 0

    def validate(self):
        checks = [
            (self.phantom in _PHANTOMS, f"phantom must be one of {_PHANTOMS}"),
            (self.mask in _MASKS, f"mask must be one of {_MASKS}"),
            (self.algorithm in _ALGORITHMS, f"algorithm must be one of {_ALGORITHMS}"),
            (self.denoiser in _DENOISERS, f"denoiser must be one of {_DENOISERS}"),
            (self.height > 0 and self.width > 0, "image shape must be positive"),
            (self.coils >= 1, "need at least one coil"),
            (self.acceleration >= 1, "acceleration must be >= 1"),
            (self.depth >= 0, "depth must be >= 0"),
            (self.snr_db == math.inf or math.isfinite(self.snr_db), "bad snr_db"),
            (self.denoiser != "external" or bool(self.endpoint),
             "external denoiser needs an endpoint"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self


def _coerce(name, kind, raw):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return math.inf if raw in ("inf", "+inf") else float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config(text):
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    # dataclass stores types directly when annotations are real types
    kinds = {f.name: type(getattr(ExperimentConfig(), f.name)) for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, kinds[key], raw)
    return ExperimentConfig(**values).validate()


def load_config(path):
    try:
        with open(path) as f:
            return parse_config(f.read())
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc

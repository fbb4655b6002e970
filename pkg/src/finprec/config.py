"""Run configuration: a flat TOML document with ``schema = 1``.

Example::

    schema = 1
    command = "sweep"
    modulation = "QPSK"
    n_t = 4
    n_r = 4
    rho_t = 0.9
    rho_r = 0.9
    n_s = 2
    snr_db = [-10, -5, 0, 5, 10]
    methods = ["optimized:2", "unprecoded", "gaussian_wf"]

Unknown keys are errors, and every problem found is reported at once.
"""

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .constants import ENUMERATION_CAP, N_CHANNELS_EXACT, NOISE_BANK_OPTIMIZE, NOISE_BANK_REPORT
from .constellation import make_constellation
from .errors import ConfigError

SCHEMA_VERSION = 1
COMMANDS = ("sweep", "optimize", "validate", "bench")


@dataclass(frozen=True)
class RunConfig:
    command: str = "sweep"
    schema: int = SCHEMA_VERSION
    modulation: str = "QPSK"
    n_t: int = 4
    n_r: int = 4
    channel: str = "exp"
    rho_t: float = 0.9
    rho_r: float = 0.9
    a_t_file: str = ""
    a_r_file: str = ""
    s: int = 0
    n_s: int = 0
    snr_db: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    max_iter: int = 200
    epsilon: float = 1e-4
    restarts: int = 3
    seed: int = 0
    optimize_noise_samples: int = NOISE_BANK_OPTIMIZE
    report_noise_samples: int = NOISE_BANK_REPORT
    exact: bool = True
    n_channels: int = N_CHANNELS_EXACT
    exact_noise_samples: int = NOISE_BANK_REPORT
    noise_per_channel: int = 0
    validate_tolerance: float = 0.15
    bench_n_t: list = field(default_factory=lambda: [4, 8])
    bench_n_s: list = field(default_factory=lambda: [2, 4])
    bench_modulations: list = field(default_factory=lambda: ["BPSK"])
    bench_repeats: int = 3
    timeout_secs: float = 300.0
    record_timing: bool = False
    output: str = "results.csv"

    @property
    def power_linear(self):
        return [10.0 ** (x / 10.0) for x in self.snr_db]


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name, value, errors):
    default = getattr(RunConfig(), name)
    kind = type(default)
    if kind is bool:
        if not isinstance(value, bool):
            errors.append(f"{name}: expected true/false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{name}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{name}: expected a number, got {value!r}")
            return value
        return float(value)
    if kind is list:
        if not isinstance(value, list):
            errors.append(f"{name}: expected a list, got {value!r}")
            return value
        return list(value)
    if not isinstance(value, str):
        errors.append(f"{name}: expected a string, got {value!r}")
    return value


def _validate(cfg: RunConfig, base_dir: Path, errors: list) -> RunConfig:
    if cfg.schema != SCHEMA_VERSION:
        errors.append(f"schema: unsupported version {cfg.schema} (expected {SCHEMA_VERSION})")
    if cfg.command not in COMMANDS:
        errors.append(f"command: must be one of {', '.join(COMMANDS)}, got {cfg.command!r}")
    m = None
    try:
        m = make_constellation(cfg.modulation).M
    except ConfigError as exc:
        errors.append(f"modulation: {exc}")
    if cfg.n_t < 1 or cfg.n_r < 1:
        errors.append("n_t, n_r: antenna counts must be >= 1")
    s, n_s = cfg.s, cfg.n_s
    if s and not n_s:
        n_s = cfg.n_t // s if s > 0 else 0
    elif n_s and not s:
        s = cfg.n_t // n_s if n_s > 0 else 0
    elif not s and not n_s:
        n_s = min(2, cfg.n_t)
        s = cfg.n_t // n_s
    if s < 1 or n_s < 1 or s * n_s != cfg.n_t:
        errors.append(f"s, n_s: S·N_s must equal N_t (S={cfg.s or s}, N_s={cfg.n_s or n_s}, N_t={cfg.n_t})")
    elif n_s > 1 and n_s % 2:
        errors.append(f"n_s: odd stream width {n_s} has no strong/weak pairing")
    elif m is not None and m ** (2 * n_s) > ENUMERATION_CAP:
        errors.append(
            f"n_s: per-stream workload M^(2·N_s) = {m}^{2 * n_s} = {float(m ** (2 * n_s)):.3g} "
            f"exceeds the enumeration cap {ENUMERATION_CAP}"
        )
    if cfg.channel == "exp":
        for name in ("rho_t", "rho_r"):
            if not 0.0 <= getattr(cfg, name) < 1.0:
                errors.append(f"{name}: must lie in [0, 1)")
    elif cfg.channel == "file":
        for name in ("a_t_file", "a_r_file"):
            path = getattr(cfg, name)
            if not path:
                errors.append(f"{name}: required when channel = \"file\"")
            elif not (base_dir / path).is_file():
                errors.append(f"{name}: file not found: {path}")
    else:
        errors.append(f"channel: must be \"exp\" or \"file\", got {cfg.channel!r}")
    if cfg.command in ("sweep", "validate", "optimize") and not cfg.snr_db:
        errors.append("snr_db: needs at least one SNR value")
    if any(b <= a for a, b in zip(cfg.snr_db, cfg.snr_db[1:])):
        errors.append("snr_db: grid must be strictly increasing")
    for method in cfg.methods:
        head, _, arg = str(method).partition(":")
        if head == "optimized":
            if not arg.isdigit() or int(arg) < 1:
                errors.append(f"methods: {method!r} needs a stream width, e.g. optimized:2")
            elif cfg.n_t % int(arg):
                errors.append(f"methods: {method!r}: S·N_s must equal N_t = {cfg.n_t}")
        elif head not in ("unprecoded", "gaussian_wf") or arg:
            errors.append(f"methods: unknown method {method!r}")
    if cfg.max_iter < 1:
        errors.append("max_iter: must be >= 1")
    if cfg.epsilon < 0:
        errors.append("epsilon: must be >= 0")
    if cfg.restarts < 1:
        errors.append("restarts: must be >= 1")
    for name in ("optimize_noise_samples", "report_noise_samples", "n_channels", "exact_noise_samples", "bench_repeats"):
        if getattr(cfg, name) < 1:
            errors.append(f"{name}: must be >= 1")
    if cfg.noise_per_channel < 0:
        errors.append("noise_per_channel: must be >= 0 (0 uses the whole bank)")
    if cfg.timeout_secs <= 0:
        errors.append("timeout_secs: must be positive")
    return replace(cfg, s=s, n_s=n_s)


def parse_config(text: str, base_dir=".", command=None) -> RunConfig:
    """Parse and validate a TOML run configuration.

    ``command`` overrides the document's ``command`` before validation, so the
    checks match the subcommand that will actually run.

    Raises:
        ConfigError: listing every problem found.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    errors = []
    unknown = sorted(set(raw) - set(_FIELDS))
    for key in unknown:
        errors.append(f"{key}: unknown key")
    if "schema" not in raw:
        errors.append("schema: missing (expected schema = 1)")
    values = {k: _coerce(k, v, errors) for k, v in raw.items() if k in _FIELDS}
    if command is not None:
        values["command"] = command
    if not errors:
        cfg = _validate(RunConfig(**values), Path(base_dir), errors)
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return cfg


def load_config(path, command=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent, command=command)


def emit_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(asdict(cfg))

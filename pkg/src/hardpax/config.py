"""Scenario files: run parameters plus fault injection declarations.

The format is UTF-8 text, one directive per line. Blank lines and lines
starting with '#' are ignored. Scenario parameters are `key=value`:

    replicas=5
    window=100
    loss_prob=0.15
    dup_prob=0.02
    delay_ms=1-20
    ops_per_replica=5000
    batch=10
    seed=42

Injections are `inject` followed by space-separated `key=value` pairs:

    inject point=NET_MSG_RECEIVED mode=timed delay_ms=10000 replicas=0
    inject point=LEARNER_COMMIT_QUORUM mode=prob p=0.8 replicas=all

Unknown keys are rejected with the offending line number. Engine tuning
knobs (timeouts, arrival rate, checkpoint cadence) are deliberately not
file-settable; tests construct ScenarioConfig directly when they need
to vary them.
"""

from dataclasses import dataclass, field, replace

from .faults import InjectionMode, InjectionPoint, InjectionSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    replicas: int = 5
    window: int = 100
    loss_prob: float = 0.15
    dup_prob: float = 0.02
    delay_min_ms: float = 1.0
    delay_max_ms: float = 20.0
    ops_per_replica: int = 5000
    batch: int = 10
    seed: int = 0
    injections: tuple[InjectionSpec, ...] = ()

    # engine knobs, not part of the file format
    arrival_rate_per_s: float = 1000.0
    batch_timeout_ms: float = 5.0
    failover_timeout_ms: float = 200.0
    recover_fast_ms: float = 100.0
    recover_idle_ms: float = 500.0
    checkpoint_interval: int = 5000
    catchup_max_slots: int = 256
    watchdog_ms: float = 30_000.0

    @property
    def quorum(self) -> int:
        return self.replicas // 2 + 1

    def with_injections(self, *specs: InjectionSpec) -> "ScenarioConfig":
        return replace(self, injections=tuple(specs))


def _parse_prob(raw: str, what: str, lineno: int) -> float:
    try:
        p = float(raw)
    except ValueError:
        raise ConfigError("line %d: %s is not a number: %r" % (lineno, what, raw))
    if not 0.0 <= p <= 1.0:
        raise ConfigError("line %d: %s out of range [0,1]: %s" % (lineno, what, raw))
    return p


def _parse_int(raw: str, what: str, lineno: int, minimum: int = 0) -> int:
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("line %d: %s is not an integer: %r" % (lineno, what, raw))
    if n < minimum:
        raise ConfigError("line %d: %s must be >= %d" % (lineno, what, minimum))
    return n


def _parse_inject(tokens: list[str], lineno: int) -> InjectionSpec:
    kv = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError("line %d: malformed inject token %r" % (lineno, tok))
        k, _, v = tok.partition("=")
        if k in kv:
            raise ConfigError("line %d: duplicate inject key %r" % (lineno, k))
        kv[k] = v

    try:
        point = InjectionPoint[kv.pop("point")]
    except KeyError:
        raise ConfigError("line %d: missing or unknown inject point" % lineno)

    mode_raw = kv.pop("mode", None)
    if mode_raw == "timed":
        mode = InjectionMode.SINGLE_TIMED
    elif mode_raw == "prob":
        mode = InjectionMode.PROBABILITY
    else:
        raise ConfigError("line %d: inject mode must be timed or prob" % lineno)

    delay_ms = 0.0
    probability = 0.0
    if mode is InjectionMode.SINGLE_TIMED:
        if "delay_ms" not in kv:
            raise ConfigError("line %d: timed inject needs delay_ms" % lineno)
        delay_ms = float(_parse_int(kv.pop("delay_ms"), "delay_ms", lineno))
    else:
        if "p" not in kv:
            raise ConfigError("line %d: prob inject needs p" % lineno)
        probability = _parse_prob(kv.pop("p"), "p", lineno)

    replicas_raw = kv.pop("replicas", "all")
    if replicas_raw == "all":
        replicas = None
    else:
        try:
            replicas = frozenset(int(part) for part in replicas_raw.split(","))
        except ValueError:
            raise ConfigError("line %d: bad replicas list %r" % (lineno, replicas_raw))

    action = kv.pop("action", "mangle")
    if action not in ("mangle", "skip"):
        raise ConfigError("line %d: action must be mangle or skip" % lineno)

    if kv:
        raise ConfigError("line %d: unknown inject keys %s" % (lineno, sorted(kv)))
    return InjectionSpec(
        point=point,
        mode=mode,
        delay_ms=delay_ms,
        probability=probability,
        replicas=replicas,
        action=action,
    )


def parse_config(text: str) -> ScenarioConfig:
    params: dict = {}
    injections: list[InjectionSpec] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("inject"):
            rest = line[len("inject"):].strip()
            if not rest:
                raise ConfigError("line %d: empty inject directive" % lineno)
            injections.append(_parse_inject(rest.split(), lineno))
            continue
        if "=" not in line or " " in line:
            raise ConfigError("line %d: malformed line %r" % (lineno, raw))
        key, _, value = line.partition("=")
        if key in params:
            raise ConfigError("line %d: duplicate key %r" % (lineno, key))
        if key == "replicas":
            params["replicas"] = _parse_int(value, "replicas", lineno, minimum=1)
        elif key == "window":
            params["window"] = _parse_int(value, "window", lineno, minimum=1)
        elif key == "loss_prob":
            params["loss_prob"] = _parse_prob(value, "loss_prob", lineno)
        elif key == "dup_prob":
            params["dup_prob"] = _parse_prob(value, "dup_prob", lineno)
        elif key == "delay_ms":
            lo, sep, hi = value.partition("-")
            if not sep:
                raise ConfigError("line %d: delay_ms must be min-max" % lineno)
            dmin = _parse_int(lo, "delay min", lineno)
            dmax = _parse_int(hi, "delay max", lineno)
            if dmax < dmin:
                raise ConfigError("line %d: delay max below min" % lineno)
            params["delay_min_ms"] = float(dmin)
            params["delay_max_ms"] = float(dmax)
        elif key == "ops_per_replica":
            params["ops_per_replica"] = _parse_int(value, "ops_per_replica", lineno)
        elif key == "batch":
            params["batch"] = _parse_int(value, "batch", lineno, minimum=1)
        elif key == "seed":
            params["seed"] = _parse_int(value, "seed", lineno)
        else:
            raise ConfigError("line %d: unknown key %r" % (lineno, key))
    return ScenarioConfig(injections=tuple(injections), **params)


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())

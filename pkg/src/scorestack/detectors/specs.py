"""Detector specifications, the hyperparameter grid, and their text form.

A spec string looks like ``KNN(k=5)`` or ``IFOREST(trees=100,subsample=256,
seed=7)``; it is used in config files, CSV column headers and report rows,
and round-trips through :func:`spec_from_string`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from ..seeding import stable_seed

NEIGHBOR_KINDS = ("KNN", "AVG_KNN", "K_MEDIAN", "LOF", "LOOP")
KINDS = NEIGHBOR_KINDS + ("OCSVM", "IFOREST")

# 1..5 then 10..100 in steps of 5: the 24-value neighbour range.
DEFAULT_K_RANGE = tuple([1, 2, 3, 4, 5] + list(range(10, 101, 5)))
DEFAULT_LOOP_K = (1, 3, 5, 10)
DEFAULT_OCSVM_NU = (0.01, 0.05, 0.1, 0.2, 0.3, 0.5)
DEFAULT_IFOREST_TREES = (10, 30, 50, 70, 100, 150, 200, 250)
DEFAULT_IFOREST_SUBSAMPLE = 256


@dataclass(frozen=True)
class DetectorSpec:
    """One unsupervised outlier scoring function plus its hyperparameters.

    Fields are per-kind: ``k`` for the neighbour-based kinds, ``nu`` and
    ``gamma_mode`` for OCSVM, ``n_trees``/``subsample`` for IFOREST. For
    OCSVM, ``subsample`` caps the number of training rows handed to the
    dual solver (None = no cap). ``seed`` drives the stochastic kinds.
    """

    kind: str
    k: int | None = None
    nu: float | None = None
    gamma_mode: str | float = "scale"
    n_trees: int | None = None
    subsample: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.kind in NEIGHBOR_KINDS:
            if self.k is None or self.k < 1:
                raise ValueError(f"{self.kind} needs k >= 1, got {self.k}")
        elif self.kind == "OCSVM":
            if self.nu is None or not (0.0 < self.nu <= 1.0):
                raise ValueError(f"OCSVM needs nu in (0, 1], got {self.nu}")
            if isinstance(self.gamma_mode, str) and self.gamma_mode != "scale":
                raise ValueError(f"unknown gamma_mode {self.gamma_mode!r}")
        elif self.kind == "IFOREST":
            if self.n_trees is None or self.n_trees < 1:
                raise ValueError(f"IFOREST needs n_trees >= 1, got {self.n_trees}")
            if self.subsample is not None and self.subsample < 2:
                raise ValueError("IFOREST subsample must be >= 2")

    def label(self) -> str:
        return spec_to_string(self)


def spec_to_string(spec: DetectorSpec) -> str:
    """Serialize to the ``KIND(key=value,...)`` text form."""
    parts: list[str] = []
    if spec.kind in NEIGHBOR_KINDS:
        parts.append(f"k={spec.k}")
    elif spec.kind == "OCSVM":
        parts.append(f"nu={spec.nu!r}")
        parts.append(f"gamma={spec.gamma_mode}")
        if spec.subsample is not None:
            parts.append(f"cap={spec.subsample}")
            parts.append(f"seed={spec.seed}")
    elif spec.kind == "IFOREST":
        parts.append(f"trees={spec.n_trees}")
        parts.append(f"subsample={spec.subsample}")
        parts.append(f"seed={spec.seed}")
    return f"{spec.kind}({','.join(parts)})"


_SPEC_RE = re.compile(r"^([A-Z_]+)\((.*)\)$")


def spec_from_string(text: str) -> DetectorSpec:
    """Parse the text form produced by :func:`spec_to_string`."""
    m = _SPEC_RE.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse detector spec {text!r}")
    kind, body = m.group(1), m.group(2)
    kv: dict[str, str] = {}
    if body:
        for item in body.split(","):
            if "=" not in item:
                raise ValueError(f"bad field {item!r} in spec {text!r}")
            key, value = item.split("=", 1)
            kv[key.strip()] = value.strip()
    if kind in NEIGHBOR_KINDS:
        return DetectorSpec(kind=kind, k=int(kv["k"]))
    if kind == "OCSVM":
        gamma: str | float = kv.get("gamma", "scale")
        if gamma != "scale":
            gamma = float(gamma)
        return DetectorSpec(
            kind=kind,
            nu=float(kv["nu"]),
            gamma_mode=gamma,
            subsample=int(kv["cap"]) if "cap" in kv else None,
            seed=int(kv.get("seed", 0)),
        )
    if kind == "IFOREST":
        sub = kv.get("subsample")
        return DetectorSpec(
            kind=kind,
            n_trees=int(kv["trees"]),
            subsample=None if sub in (None, "None") else int(sub),
            seed=int(kv.get("seed", 0)),
        )
    raise ValueError(f"unknown detector kind {kind!r}")


@dataclass(frozen=True)
class GridConfig:
    """Per-kind hyperparameter values to expand into a detector grid.

    The defaults give 24 k-values for each of KNN/AVG_KNN/K_MEDIAN/LOF, a
    narrow LOOP range, six OCSVM nu values and eight IFOREST sizes: 114
    specs in total. Every list is overridable; an empty list drops the kind.
    """

    knn_k: tuple[int, ...] = DEFAULT_K_RANGE
    avg_knn_k: tuple[int, ...] = DEFAULT_K_RANGE
    k_median_k: tuple[int, ...] = DEFAULT_K_RANGE
    lof_k: tuple[int, ...] = DEFAULT_K_RANGE
    loop_k: tuple[int, ...] = DEFAULT_LOOP_K
    ocsvm_nu: tuple[float, ...] = DEFAULT_OCSVM_NU
    ocsvm_gamma: str | float = "scale"
    ocsvm_cap: int | None = None
    iforest_trees: tuple[int, ...] = DEFAULT_IFOREST_TREES
    iforest_subsample: int = DEFAULT_IFOREST_SUBSAMPLE
    seed: int = 0

    @classmethod
    def reduced(cls, seed: int = 0) -> "GridConfig":
        """A ~30-spec grid for desk-scale experiments."""
        small = (1, 3, 5, 10, 20, 50)
        return cls(
            knn_k=small,
            avg_knn_k=small,
            k_median_k=small,
            lof_k=small,
            loop_k=(5,),
            ocsvm_nu=(0.1, 0.5),
            ocsvm_cap=2000,
            iforest_trees=(50, 100, 200),
            seed=seed,
        )

    @classmethod
    def from_dict(cls, raw: dict, seed: int = 0) -> "GridConfig":
        """Build from a config mapping; unknown keys are rejected."""
        raw = dict(raw)
        profile = raw.pop("profile", None)
        base = cls.reduced(seed=seed) if profile == "reduced" else cls(seed=seed)
        if profile not in (None, "default", "reduced"):
            raise ValueError(f"unknown grid profile {profile!r}")
        fields = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - fields
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        coerced = {}
        for key, value in raw.items():
            if isinstance(value, list):
                coerced[key] = tuple(value)
            else:
                coerced[key] = value
        return replace(base, **coerced)


def build_grid(config: GridConfig | None = None) -> list[DetectorSpec]:
    """Cartesian expansion of the grid config into DetectorSpecs.

    Duplicate hyperparameter values are preserved (the expansion is
    mechanical). Specs whose k is too large for a given training set are
    dropped later, at fit time, with a warning.
    """
    cfg = config or GridConfig()
    specs: list[DetectorSpec] = []
    for kind, ks in (
        ("KNN", cfg.knn_k),
        ("AVG_KNN", cfg.avg_knn_k),
        ("K_MEDIAN", cfg.k_median_k),
        ("LOF", cfg.lof_k),
        ("LOOP", cfg.loop_k),
    ):
        for k in ks:
            specs.append(DetectorSpec(kind=kind, k=int(k)))
    for nu in cfg.ocsvm_nu:
        spec = DetectorSpec(
            kind="OCSVM", nu=float(nu), gamma_mode=cfg.ocsvm_gamma,
            subsample=cfg.ocsvm_cap,
        )
        if cfg.ocsvm_cap is not None:
            # the solver is stochastic only when it subsamples
            spec = replace(spec, seed=stable_seed(cfg.seed, spec_to_string(spec)))
        specs.append(spec)
    for n_trees in cfg.iforest_trees:
        spec = DetectorSpec(
            kind="IFOREST", n_trees=int(n_trees), subsample=cfg.iforest_subsample,
        )
        specs.append(replace(spec, seed=stable_seed(cfg.seed, spec_to_string(spec))))
    if not specs:
        raise ValueError("grid config expands to no detector specs")
    return specs

"""Run configuration, the built-in boundary-data family and boundary-data files.

A configuration is a JSON object; every key is optional and missing keys
take the defaults below.  Schema (types in brackets)::

    boundary:
      family      "linear" | "zero" | "file"
      c           [3][4][4] coefficients c[a][j][k] of x^j dx^k e_a, or omitted
      c_seed      [int] draw c from N(0, c_scale^2) when c is omitted
      c_scale     [float]
      delta       [float] weight of the quadratic perturbation
      terms       [[exponent[4], nu, lie[3]], ...] quadratic perturbation terms
      path        [str] boundary CSV (family "file")
    grids:        galerkin_degree, fit_degree, landscape_radius, landscape_n,
                  reduced_nr, reduced_sphere[3], bubble_n_per, bubble_n_outer,
                  bubble_sphere[3], instanton_n_per, instanton_n_outer,
                  instanton_sphere[3]
    d0, lam0, D1, D2, eps_max              [float]
    eps_list, small_eps_list, probe_eps    [float list]
    fixture:      p[4], g[4] or "optimal" (maximizes the rotation pairing at p),
                  lambda_factor (lam^2 = lambda_factor * eps)
    n_probe, n_gradient                    [int]
    tolerance_profile                      "default" | "strict"
    out_dir, seed
"""

from dataclasses import dataclass, field, asdict, replace
import hashlib
import json
import csv

import numpy as np

from .harmonic import BoundaryForm
from .polyforms import PolyForm
from .quadrature import sphere_rule


class ConfigError(ValueError):
    """Invalid configuration (exit code 2 on the command line)."""


# x0 x1 dx2 e1 + x1 x2 dx3 e2 + x2 x3 dx0 e3 + x0 x3 dx1 (e1 + e3): degree-2 harmonic coefficients
DEFAULT_TERMS = (
    ((1, 1, 0, 0), 2, (1.0, 0.0, 0.0)),
    ((0, 1, 1, 0), 3, (0.0, 1.0, 0.0)),
    ((0, 0, 1, 1), 0, (0.0, 0.0, 1.0)),
    ((1, 0, 0, 1), 1, (1.0, 0.0, 1.0)),
)

TOLERANCES = {
    "default": {"instanton_action_rel": 5e-3, "asd_ratio": 1e-8, "gluing_residual": 1e-12,
                "chern": 1e-2, "h_slope": (3.7, 4.3), "h0_match": 1e-8, "small_slope": (0.8, 1.2),
                "r1_slope": 2.7, "golden": 1e-8, "so3": 1e-3, "envelope_ratio": 2.0},
    "strict": {"instanton_action_rel": 1e-3, "asd_ratio": 1e-12, "gluing_residual": 1e-13,
               "chern": 1e-3, "h_slope": (3.8, 4.2), "h0_match": 1e-10, "small_slope": (0.9, 1.1),
               "r1_slope": 2.8, "golden": 1e-10, "so3": 1e-3, "envelope_ratio": 1.5},
}


def _default_grids():
    return {"galerkin_degree": 4, "fit_degree": 4, "landscape_radius": 0.45, "landscape_n": 7,
            "reduced_nr": 12, "reduced_sphere": [10, 10, 20],
            "bubble_n_per": 16, "bubble_n_outer": 32, "bubble_sphere": [10, 10, 20],
            "instanton_n_per": 20, "instanton_n_outer": 40, "instanton_sphere": [8, 8, 16]}


def _default_boundary():
    return {"family": "linear", "c_seed": 3, "c_scale": 1.0, "delta": 0.0}


def _default_fixture():
    return {"p": [0.2, 0.1, 0.0, 0.0], "g": "optimal", "lambda_factor": 1.0}


@dataclass
class RunConfig:
    boundary: dict = field(default_factory=_default_boundary)
    grids: dict = field(default_factory=_default_grids)
    d0: float = 0.5
    lam0: float = 0.24
    D1: float = 0.5
    D2: float = 2.0
    eps_max: float = 0.1
    eps_list: list = field(default_factory=lambda: [0.04, 0.02, 0.01, 0.005])
    small_eps_list: list = field(default_factory=lambda: [0.02, 0.04, 0.08])
    probe_eps: list = field(default_factory=lambda: [0.02, 0.01, 0.005])
    fixture: dict = field(default_factory=_default_fixture)
    n_probe: int = 50
    n_gradient: int = 20
    tolerance_profile: str = "default"
    out_dir: str = "out"
    seed: int = 0

    def validate(self):
        if not 0 < 2 * self.lam0 < self.d0 < 1:
            raise ConfigError("need 0 < 2 lam0 < d0 < 1")
        if not 0 < self.D1 < self.D2:
            raise ConfigError("need 0 < D1 < D2")
        if not 0 < self.eps_max <= 0.1:
            raise ConfigError("eps_max must lie in (0, 0.1]: the Picard guard")
        for name in ("eps_list", "small_eps_list", "probe_eps"):
            v = getattr(self, name)
            if any(e <= 0 for e in v):
                raise ConfigError(f"{name} must be positive")
        if max(self.eps_list, default=0) > self.eps_max:
            raise ConfigError("eps_list exceeds eps_max")
        if self.tolerance_profile not in TOLERANCES:
            raise ConfigError(f"unknown tolerance profile {self.tolerance_profile!r}")
        fam = self.boundary.get("family", "linear")
        if fam not in ("linear", "zero", "file"):
            raise ConfigError(f"unknown boundary family {fam!r}")
        if fam == "file" and "path" not in self.boundary:
            raise ConfigError("boundary family 'file' needs a path")
        if "c" in self.boundary and np.shape(self.boundary["c"]) != (3, 4, 4):
            raise ConfigError("boundary c must have shape (3, 4, 4)")
        p = np.asarray(self.fixture.get("p", [0, 0, 0, 0]), dtype=float)
        if p.shape != (4,) or np.linalg.norm(p) >= 1 - self.d0:
            raise ConfigError("fixture p must be a 4-vector with |p| < 1 - d0")
        g = self.fixture.get("g", "optimal")
        if isinstance(g, str):
            if g != "optimal":
                raise ConfigError("fixture g must be a unit quaternion or 'optimal'")
        elif np.shape(g) != (4,) or not np.linalg.norm(g) > 0:
            raise ConfigError("fixture g must be a nonzero 4-vector")
        lf = self.fixture.get("lambda_factor", 1.0)
        if not self.D1 < lf < self.D2:
            raise ConfigError("fixture lambda_factor must lie in (D1, D2)")
        if max(self.eps_list + self.probe_eps) * lf >= self.lam0 ** 2:
            raise ConfigError("largest eps puts lam outside (0, lam0)")
        return self

    @property
    def tolerances(self):
        return TOLERANCES[self.tolerance_profile]

    def to_dict(self):
        return asdict(self)

    def digest(self):
        s = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(s.encode()).hexdigest()

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None}).validate()

    # ---- derived objects

    def boundary_data(self):
        return boundary_family(self.boundary)

    def fixture_q(self, eps, g=None):
        """Bubble parameters at ``eps``; ``g`` overrides the configured gauge (needed for "optimal")."""
        from .gluing import GlueParams
        lam = float(np.sqrt(self.fixture.get("lambda_factor", 1.0) * eps))
        if g is None:
            g = self.fixture.get("g", [1, 0, 0, 0])
            if isinstance(g, str):
                raise ConfigError("fixture g is 'optimal'; resolve it against the background first")
        return GlueParams(tuple(self.fixture["p"]), tuple(g), lam, eps)


def load_config(path=None, **overrides):
    """Read a JSON config (or the defaults when ``path`` is None) and validate it."""
    data = {}
    if path is not None:
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig()
    for k in ("boundary", "grids", "fixture"):
        if k in data:
            merged = dict(getattr(cfg, k))
            merged.update(data.pop(k))
            setattr(cfg, k, merged)
    for k, v in data.items():
        setattr(cfg, k, v)
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()


# ---------------------------------------------------------------- boundary family

def linear_coefficients(boundary):
    if "c" in boundary:
        return np.asarray(boundary["c"], dtype=float)
    rng = np.random.default_rng(boundary.get("c_seed", 3))
    return boundary.get("c_scale", 1.0) * rng.normal(size=(3, 4, 4))


def boundary_family(boundary):
    """The boundary potential ``A0``: a PolyForm (built-in family) or a BoundaryForm (file).

    Built-in: ``sum c[a,j,k] x^j dx^k e_a + delta * sum(terms)``.  Only its
    tangential trace on S^3 matters downstream.
    """
    fam = boundary.get("family", "linear")
    if fam == "file":
        return read_boundary_csv(boundary["path"])
    if fam == "zero":
        return PolyForm.zero(1)
    A = PolyForm.linear(linear_coefficients(boundary))
    delta = float(boundary.get("delta", 0.0))
    if delta != 0.0:
        terms = boundary.get("terms", DEFAULT_TERMS)
        A = A + PolyForm.from_terms(terms, 2).scaled(delta)
    return A


# ---------------------------------------------------------------- boundary files

FIELDS = ["z0", "z1", "z2", "z3", "w"] + [f"A{nu}_{a}" for nu in range(4) for a in range(3)]


def node_hash(nodes, weights):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(nodes, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(weights, dtype="<f8").tobytes())
    return h.hexdigest()


def write_boundary_csv(path, bdry):
    """Write S^3 node values; the first line declares the node-set hash."""
    with open(path, "w", newline="") as f:
        f.write(f"# node_hash={node_hash(bdry.nodes, bdry.weights)}\n")
        w = csv.writer(f)
        w.writerow(FIELDS)
        for z, wt, v in zip(bdry.nodes, bdry.weights, bdry.values):
            w.writerow([repr(float(t)) for t in z] + [repr(float(wt))] + [repr(float(t)) for t in v.reshape(-1)])


def read_boundary_csv(path):
    """Read a boundary file, checking its declared node hash."""
    try:
        with open(path) as f:
            head = f.readline().strip()
            rows = list(csv.reader(f))
    except OSError as e:
        raise ConfigError(f"cannot read boundary file {path}: {e}") from e
    if not head.startswith("# node_hash="):
        raise ConfigError("boundary file must start with '# node_hash=<sha256>'")
    if not rows or rows[0] != FIELDS:
        raise ConfigError("boundary file has unexpected columns")
    data = np.array(rows[1:], dtype=float)
    nodes, weights, values = data[:, :4], data[:, 4], data[:, 5:].reshape(-1, 4, 3)
    if node_hash(nodes, weights) != head.split("=", 1)[1]:
        raise ConfigError("boundary file node hash does not match its nodes")
    if np.max(np.abs(np.linalg.norm(nodes, axis=1) - 1)) > 1e-12:
        raise ConfigError("boundary nodes must lie on the unit sphere")
    return BoundaryForm(nodes, weights, values)


def sample_boundary(A, sphere=None):
    """Sample a potential at sphere nodes as a BoundaryForm (for writing files)."""
    sphere = sphere or sphere_rule(12, 12, 24)
    v, _ = A(sphere.nodes)
    return BoundaryForm(sphere.nodes, sphere.weights, v)

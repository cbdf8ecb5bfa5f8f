"""Block abstraction and fixed-macro-step master.

Subsystems implement a small lifecycle contract (init / set_inputs /
do_step / get_outputs plus snapshot / restore for iterative schemes) and are
wired into a CouplingGraph of typed, unit-checked port connections. The
master advances all blocks on a fixed macro step, sweeping them in a given
order (Gauss-Seidel by default, Jacobi optionally) and, when more than one
iteration is configured, repeating the sweep from a state snapshot with
relaxation until the connected temperature and flow ports settle below the
configured tolerances.

All master parameters are explicit configuration with documented defaults;
nothing is adapted silently at run time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import DhtwinError

logger = logging.getLogger(__name__)


class UnknownPort(DhtwinError):
    pass


class UnitMismatch(DhtwinError):
    pass


class AlreadyBound(DhtwinError):
    pass


class NonConvergence(DhtwinError):
    def __init__(self, message, t=None, residual=None):
        super().__init__(message)
        self.t = t
        self.residual = residual


@dataclass(frozen=True)
class PortSpec:
    name: str
    unit: str   # degC | kg/s | W | flag


class Block:
    """Base class for co-simulated subsystems.

    Subclasses declare input/output PortSpecs, implement do_step, and keep
    get_outputs valid from init time on (the master needs starting values
    for feedback edges before the first sweep).
    """

    def __init__(self, name: str):
        self.name = name
        self.input_ports: dict[str, PortSpec] = {}
        self.output_ports: dict[str, PortSpec] = {}
        self._inputs: dict[str, float] = {}
        self._outputs: dict[str, float] = {}

    def declare_input(self, name: str, unit: str, default=0.0):
        self.input_ports[name] = PortSpec(name, unit)
        self._inputs[name] = default

    def declare_output(self, name: str, unit: str, initial=0.0):
        self.output_ports[name] = PortSpec(name, unit)
        self._outputs[name] = initial

    def init(self, t0: float):
        pass

    def set_inputs(self, values: dict):
        for k, v in values.items():
            if k not in self.input_ports:
                raise UnknownPort(f"{self.name} has no input port {k!r}")
            self._inputs[k] = v

    def do_step(self, t: float, dt: float):
        raise NotImplementedError

    def get_outputs(self) -> dict:
        return dict(self._outputs)

    def snapshot(self):
        return dict(self._outputs)

    def restore(self, snap):
        self._outputs = dict(snap)


@dataclass(frozen=True)
class Connection:
    src_block: str
    src_port: str
    dst_block: str
    dst_port: str


@dataclass
class MasterConfig:
    dt: float = 60.0
    scheme: str = "gauss_seidel"        # gauss_seidel | jacobi
    max_iterations: int = 5
    relaxation: float = 1.0
    tol_temp: float = 0.01              # K on degC ports
    tol_flow: float = 1e-4              # kg/s on flow ports
    on_nonconvergence: str = "warn"     # warn | abort

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError("relaxation must be in (0, 1]")
        if self.scheme not in ("gauss_seidel", "jacobi"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.on_nonconvergence not in ("warn", "abort"):
            raise ValueError("on_nonconvergence must be warn or abort")


class CouplingGraph:
    def __init__(self):
        self.blocks: dict[str, Block] = {}
        self.connections: list[Connection] = []
        self._bound: set[tuple[str, str]] = set()
        self._inbound: dict[str, list[Connection]] = {}

    def add_block(self, block: Block) -> Block:
        if block.name in self.blocks:
            raise ValueError(f"duplicate block name {block.name!r}")
        self.blocks[block.name] = block
        self._inbound[block.name] = []
        return block

    def connect(self, src_block: str, src_port: str, dst_block: str, dst_port: str):
        if src_block not in self.blocks:
            raise UnknownPort(f"unknown block {src_block!r}")
        if dst_block not in self.blocks:
            raise UnknownPort(f"unknown block {dst_block!r}")
        src = self.blocks[src_block]
        dst = self.blocks[dst_block]
        if src_port not in src.output_ports:
            raise UnknownPort(f"{src_block} has no output port {src_port!r}")
        if dst_port not in dst.input_ports:
            raise UnknownPort(f"{dst_block} has no input port {dst_port!r}")
        if src.output_ports[src_port].unit != dst.input_ports[dst_port].unit:
            raise UnitMismatch(
                f"{src_block}.{src_port} [{src.output_ports[src_port].unit}] -> "
                f"{dst_block}.{dst_port} [{dst.input_ports[dst_port].unit}]")
        if (dst_block, dst_port) in self._bound:
            raise AlreadyBound(f"{dst_block}.{dst_port} is already bound")
        conn = Connection(src_block, src_port, dst_block, dst_port)
        self.connections.append(conn)
        self._bound.add((dst_block, dst_port))
        self._inbound[dst_block].append(conn)
        return conn

    def init_all(self, t0: float) -> dict:
        for block in self.blocks.values():
            block.init(t0)
        return self.collect_ports()

    def collect_ports(self) -> dict:
        table = {}
        for name, block in self.blocks.items():
            for port, value in block.get_outputs().items():
                table[(name, port)] = value
        return table

    def port_unit(self, block: str, port: str) -> str:
        b = self.blocks[block]
        if port in b.output_ports:
            return b.output_ports[port].unit
        return b.input_ports[port].unit

    def _residual_keys(self, cfg: "MasterConfig"):
        # (src key, tolerance) per connection, cached per wiring state
        token = (len(self.connections), cfg.tol_temp, cfg.tol_flow)
        cached = getattr(self, "_residual_cache", None)
        if cached and cached[0] == token:
            return cached[1]
        keys = []
        for conn in self.connections:
            unit = self.port_unit(conn.src_block, conn.src_port)
            if unit == "degC":
                keys.append(((conn.src_block, conn.src_port), cfg.tol_temp))
            elif unit == "kg/s":
                keys.append(((conn.src_block, conn.src_port), cfg.tol_flow))
        self._residual_cache = (token, keys)
        return keys


def do_macro_step(graph: CouplingGraph, cfg: MasterConfig, t: float, dt: float,
                  ports: dict) -> tuple[dict, int, bool, float]:
    """One macro step over all blocks.

    ports holds the current (block, port) -> value table and is replaced by
    the converged table. Returns (ports, iterations_used, converged,
    residual). With max_iterations == 1 no snapshots are taken and the step
    is a single sweep, reported as converged.
    """
    snaps = None
    if cfg.max_iterations > 1:
        snaps = {name: b.snapshot() for name, b in graph.blocks.items()}
    residual_keys = graph._residual_keys(cfg)
    relax = cfg.relaxation
    jacobi = cfg.scheme == "jacobi"

    prev = ports
    residual = 0.0
    converged = False
    used = 0
    for it in range(cfg.max_iterations):
        used = it + 1
        if it > 0:
            for name, b in graph.blocks.items():
                b.restore(snaps[name])
        table = dict(prev)
        source = prev if jacobi else table
        for name, block in graph.blocks.items():
            inputs = block._inputs
            for conn in graph._inbound[name]:
                inputs[conn.dst_port] = source[(conn.src_block, conn.src_port)]
            block.do_step(t, dt)
            outs = block._outputs
            if it > 0 and relax < 1.0:
                for port, value in outs.items():
                    key = (name, port)
                    old = prev.get(key)
                    table[key] = value if old is None else relax * value + (1.0 - relax) * old
            else:
                for port, value in outs.items():
                    table[(name, port)] = value

        # residual: largest connected-port movement between iterates, scaled
        # by the per-unit tolerance (only temperatures and flows are typed)
        residual = 0.0
        for key, tol in residual_keys:
            delta = abs(table[key] - prev.get(key, table[key]))
            scaled = delta / tol if tol > 0 else (float("inf") if delta else 0.0)
            if scaled > residual:
                residual = scaled
        prev = table
        if residual < 1.0:
            converged = True
            break

    return prev, used, converged, residual


@dataclass
class RunArchive:
    """Columnar record of selected ports over a run."""

    t0: float
    dt: float
    columns: list      # (block, port, unit) triples
    data: np.ndarray   # shape (n_steps, n_columns)
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return int(self.data.shape[0])

    def column(self, block: str, port: str) -> np.ndarray:
        for i, (b, p, _) in enumerate(self.columns):
            if b == block and p == port:
                return self.data[:, i]
        raise KeyError(f"{block}.{port} not recorded")

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write("# dhtwin-archive v1\n")
            fh.write(f"# t0_s={self.t0!r} dt_s={self.dt!r} n_steps={self.n_steps}\n")
            for k in sorted(self.meta):
                fh.write(f"# meta {k}={self.meta[k]}\n")
            fh.write("# column t_s [s] -\n")
            for b, p, u in self.columns:
                fh.write(f"# column {p} [{u}] {b}\n")
            fh.write("t_s," + ",".join(f"{b}.{p}" for b, p, _ in self.columns) + "\n")
            times = self.times()
            for i in range(self.n_steps):
                row = [repr(float(times[i]))]
                row.extend(repr(float(v)) for v in self.data[i])
                fh.write(",".join(row) + "\n")

    @classmethod
    def read(cls, path) -> "RunArchive":
        columns = []
        meta = {}
        t0 = dt = None
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# dhtwin-archive"):
                    continue
                if line.startswith("# t0_s="):
                    parts = line[2:].split()
                    t0 = float(parts[0].split("=")[1])
                    dt = float(parts[1].split("=")[1])
                elif line.startswith("# meta "):
                    k, v = line[len("# meta "):].split("=", 1)
                    meta[k] = v
                elif line.startswith("# column "):
                    body = line[len("# column "):]
                    name, rest = body.split(" [", 1)
                    unit, blk = rest.split("] ", 1)
                    if name == "t_s":
                        continue
                    columns.append((blk.strip(), name.strip(), unit.strip()))
                elif line.startswith("#") or not line.strip():
                    continue
                elif line.startswith("t_s,"):
                    continue
                else:
                    rows.append([float(x) for x in line.split(",")])
        arr = np.asarray(rows)
        if arr.size == 0:
            arr = np.zeros((0, len(columns) + 1))
        return cls(t0=t0, dt=dt, columns=columns, data=arr[:, 1:], meta=meta)


def run(graph: CouplingGraph, cfg: MasterConfig, t0: float, t1: float,
        record: list | None = None, record_from: float | None = None,
        integrate: dict | None = None, integrate_from: float | None = None,
        meta: dict | None = None, step_hook=None) -> tuple[RunArchive, dict]:
    """Iterate macro steps from t0 to t1 and record selected ports.

    record: list of (block, port) to archive each step (after the step).
    integrate: {name: (block, port)} port values in W accumulated to joules.
    record_from / integrate_from allow discarding a spin-up interval.
    Returns (archive, integrals). Raises NonConvergence when the master
    fails to converge and the policy is abort.
    """
    span = t1 - t0
    if span < 0:
        raise ValueError("t1 must be >= t0")
    n_total = int(round(span / cfg.dt))
    if abs(n_total * cfg.dt - span) > 1e-6:
        raise ValueError("run span must be a multiple of the macro step")
    record = record or []
    integrate = integrate or {}
    record_from = t0 if record_from is None else record_from
    integrate_from = t0 if integrate_from is None else integrate_from

    ports = graph.init_all(t0)
    columns = [(b, p, graph.port_unit(b, p)) for b, p in record]
    n_rec = sum(1 for k in range(n_total) if t0 + k * cfg.dt >= record_from)
    data = np.zeros((n_rec, len(columns)))
    integrals = {name: 0.0 for name in integrate}
    rec_t0 = None
    warned = 0

    row = 0
    for k in range(n_total):
        t = t0 + k * cfg.dt
        ports, used, converged, residual = do_macro_step(graph, cfg, t, cfg.dt, ports)
        if not converged:
            if cfg.on_nonconvergence == "abort":
                raise NonConvergence(
                    f"master did not converge at t={t} (residual {residual:.3g} x tol)",
                    t=t, residual=residual)
            warned += 1
            if warned <= 5:
                logger.warning("master not converged at t=%s (residual %.3g x tol)",
                               t, residual)
        if t >= integrate_from:
            for name, (b, p) in integrate.items():
                integrals[name] += ports[(b, p)] * cfg.dt
        if t >= record_from:
            if rec_t0 is None:
                rec_t0 = t
            for i, (b, p) in enumerate(record):
                data[row, i] = ports[(b, p)]
            row += 1
        if step_hook is not None:
            step_hook(t, ports)

    archive = RunArchive(t0=rec_t0 if rec_t0 is not None else t0, dt=cfg.dt,
                         columns=columns, data=data, meta=dict(meta or {}))
    if warned:
        archive.meta.setdefault("nonconverged_steps", str(warned))
    return archive, integrals

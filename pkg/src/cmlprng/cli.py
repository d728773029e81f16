"""Command line interface: ``cmlprng {gen,le,bifurcation,hist,test,bench,replay}``.

Every command writes a key=value manifest next to its output (or to
``--manifest``).  ``cmlprng replay MANIFEST`` re-runs the recorded command
with identical parameters and seeds.

Exit codes: 0 success, 1 invalid arguments, 2 runtime failure (independence
retries exhausted, degenerate orbit), 3 I/O error.
"""

from __future__ import annotations

import argparse
import secrets
import shlex
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import DegenerateOrbitError, DomainError, IndependenceError
from .extractor import BitStream, Instance, InstancePair, correlated_pair, extract_stream, generate_bytes
from .lattice import Fixed, Float64, LatticeConfig, new_lattice, orbit
from .local_maps import LocalMap, MapKind, local_le
from .lyapunov import le_spectrum, numeric_to_csv, wolf_le
from .stats import (BATTERY, orbit_histogram, bifurcation_scan, reports_to_csv, run_battery,
                    two_level_evaluate, two_level_to_csv)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

SEED_EXPANSION = ("numpy Philox4x64-10 keyed by the seed; one uint64 per node, row-major; "
                  "fixed: top z bits, float: top 52 bits; instance B = A + perturb (mod 1) "
                  "unless seed_b is given")

_MU_RANGE = {"logistic": (2.5, 4.0), "tent": (1.0, 2.0), "plm": (1.0, 4.0)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    argv: list[str]
    params: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    duration_s: float = 0.0

    def to_text(self) -> str:
        lines = [f"command={self.command}", f"version={self.version}",
                 f"argv={shlex.join(self.argv)}", f"duration_s={self.duration_s:.6f}"]
        lines += [f"{k}={v}" for k, v in self.params.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> RunManifest:
        kv = {}
        for line in text.splitlines():
            if line.strip() and "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = v
        argv = shlex.split(kv.pop("argv"))
        command = kv.pop("command")
        version = kv.pop("version", "")
        duration = float(kv.pop("duration_s", 0.0))
        return cls(command, argv, kv, version, duration)


def _canonical_argv(parser: argparse.ArgumentParser, command: str, ns: argparse.Namespace) -> list[str]:
    argv = [command]
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help", "manifest"):
            continue
        val = getattr(ns, action.dest, None)
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if val:
                argv.append(flag)
        elif val is not None:
            argv += [flag, str(val)]
    return argv


# --------------------------------------------------------------------------
# argument groups
# --------------------------------------------------------------------------

def _add_lattice_args(p: argparse.ArgumentParser, z_default: int | None = None):
    p.add_argument("--map", choices=[k.value for k in MapKind], default="logistic")
    p.add_argument("--mu", type=float, default=None, help="map parameter (default: 4, 2, 4)")
    p.add_argument("--segments", type=int, default=64, help="PLM segment count")
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--arith", choices=["fixed", "float"], default="fixed" if z_default else "float")
    if z_default:
        p.add_argument("--z", type=int, default=None, help="precision bits (default: 64 fixed, 52 float)")


def _add_pair_args(p: argparse.ArgumentParser):
    p.add_argument("--seed-a", type=int, default=None)
    p.add_argument("--seed-b", type=int, default=None,
                   help="seed instance B independently instead of perturbing A")
    p.add_argument("--perturb", type=float, default=1e-3)
    p.add_argument("--map-b", choices=[k.value for k in MapKind], default=None)
    p.add_argument("--mu-b", type=float, default=None)
    p.add_argument("--k-window", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05, help="independence-test level")
    p.add_argument("--max-windows", type=int, default=16)
    p.add_argument("--retest-interval", type=int, default=None)
    p.add_argument("--tap", default="1,1")
    p.add_argument("--all-nodes", action="store_true")


def _node(text: str) -> tuple[int, int]:
    try:
        u, v = (int(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"node must look like 'u,v', got {text!r}") from None
    return u, v


def _config(ns, kind=None, mu=None) -> LatticeConfig:
    kind = MapKind(kind or ns.map)
    mu = mu if mu is not None else ns.mu
    fmap = LocalMap(kind, mu, ns.segments) if mu is not None else LocalMap(kind, LocalMap.default(kind).mu, ns.segments)
    z = getattr(ns, "z", 64)
    arith = Fixed(z) if ns.arith == "fixed" else Float64()
    return LatticeConfig(ns.rows, ns.cols, ns.epsilon, fmap, arith)


def _resolve_seeds(ns):
    if ns.seed_a is None:
        ns.seed_a = secrets.randbits(63)


def _make_pair(ns, seed_a: int, seed_b: int | None) -> InstancePair:
    cfg_a = _config(ns)
    cfg_b = _config(ns, ns.map_b, ns.mu_b) if (ns.map_b or ns.mu_b is not None) else cfg_a
    kwargs = dict(tap_a=_node(ns.tap), tap_b=_node(ns.tap), z=ns.z, k_window=ns.k_window,
                  alpha=ns.alpha, max_windows=ns.max_windows,
                  retest_interval=ns.retest_interval, all_nodes=ns.all_nodes)
    if seed_b is None:
        return correlated_pair(cfg_a, seed_a, ns.perturb, cfg_b, **kwargs)
    return InstancePair(Instance.seeded(cfg_a, seed_a), Instance.seeded(cfg_b, seed_b), **kwargs)


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _write_text(path: str, text: str, stdout) -> None:
    if path == "-":
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _manifest_path(ns) -> str | None:
    if ns.manifest:
        return ns.manifest
    out = getattr(ns, "out", "-")
    return None if out == "-" else out + ".manifest"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_gen(ns, stdout, stderr) -> dict[str, str]:
    _resolve_seeds(ns)
    if ns.bits < 0:
        raise DomainError("--bits must be non-negative")
    pair = _make_pair(ns, ns.seed_a, ns.seed_b)
    stream = extract_stream(pair, ns.bits)
    if ns.out == "-":
        if ns.format == "ascii":
            stdout.write(stream.to_ascii())
        else:
            stdout.flush()
            getattr(stdout, "buffer", stdout).write(stream.to_bytes())
    else:
        stream.write(ns.out, ns.format)
    return stream.origin


def cmd_le(ns, stdout, stderr) -> dict[str, str]:
    cfg = _config(ns)
    le_f = ns.le_f if ns.le_f is not None else local_le(cfg.map, n_iter=ns.local_iter)
    spec = le_spectrum(le_f, cfg.epsilon, cfg.rows, cfg.cols)
    text = spec.to_csv()
    info = {"le_f": repr(le_f), "max_le": repr(spec.max)}
    if ns.numeric:
        est = wolf_le(cfg, ns.n_iter, ns.n_discard, synchronized=not ns.unsynchronized, seed=ns.seed)
        dev = float(np.max(np.abs(est - spec.values)))
        text += "\n" + numeric_to_csv(est) + f"\nmax_abs_deviation,{dev!r}\n"
        info["max_abs_deviation"] = repr(dev)
        stderr.write(f"max |analytic - numeric| = {dev:.6f}\n")
    _write_text(ns.out, text, stdout)
    return info


def cmd_bifurcation(ns, stdout, stderr) -> dict[str, str]:
    lo, hi = _MU_RANGE[ns.map]
    lo = ns.mu_min if ns.mu_min is not None else lo
    hi = ns.mu_max if ns.mu_max is not None else hi
    cfg = _config(ns, mu=LocalMap.default(ns.map).mu)
    rows = bifurcation_scan(ns.map, (lo, hi), ns.mu_steps, cfg, _node(ns.node), ns.points,
                            ns.discard, ns.seed, ns.segments)
    lines = ["mu,value"] + [f"{float(m)!r},{float(v)!r}" for m, v in rows]
    _write_text(ns.out, "\n".join(lines) + "\n", stdout)
    return {"rows": str(len(rows))}


def cmd_hist(ns, stdout, stderr) -> dict[str, str]:
    if ns.input:
        values = np.loadtxt(ns.input, dtype=np.float64, ndmin=1)
    else:
        cfg = _config(ns)
        st = new_lattice(cfg, ns.seed)
        values = orbit(st, cfg, _node(ns.node), ns.points, ns.discard)
    counts = orbit_histogram(values, ns.bins)
    edges = np.linspace(0.0, 1.0, ns.bins + 1)
    lines = ["bin_lo,bin_hi,count"] + [f"{float(edges[i])!r},{float(edges[i + 1])!r},{int(c)}" for i, c in enumerate(counts)]
    _write_text(ns.out, "\n".join(lines) + "\n", stdout)
    return {"samples": str(int(counts.sum()))}


def _battery(bits, ns):
    # skipped sub-tests are reported once per run, not per sequence
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_battery(bits, ns.nist_alpha, ns.block_len)


def _test_one(args):
    ns, i = args
    seed_b = None if ns.seed_b is None else ns.seed_b + i
    pair = _make_pair(ns, ns.seed_a + i, seed_b)
    bits = extract_stream(pair, ns.length).bits
    return _battery(bits, ns)


def _input_sequences(ns):
    if ns.input_format == "ascii":
        with open(ns.input, encoding="ascii") as fh:
            stream = BitStream.from_ascii(fh.read())
    else:
        with open(ns.input, "rb") as fh:
            stream = BitStream.from_bytes(fh.read())
    n = len(stream) // ns.length
    if n == 0:
        raise DomainError(f"input holds fewer than --length={ns.length} bits")
    return [stream.bits[i * ns.length:(i + 1) * ns.length] for i in range(min(n, ns.sequences))]


def cmd_test(ns, stdout, stderr) -> dict[str, str]:
    if ns.input:
        seqs = _input_sequences(ns)
        per_seq = [_battery(b, ns) for b in seqs]
    else:
        _resolve_seeds(ns)
        jobs = [(ns, i) for i in range(ns.sequences)]
        if ns.jobs > 1:
            with ProcessPoolExecutor(ns.jobs) as pool:
                per_seq = list(pool.map(_test_one, jobs))
        else:
            per_seq = [_test_one(j) for j in jobs]
    by_test: dict[str, list] = {}
    for reports in per_seq:
        for r in reports:
            by_test.setdefault(r.name, []).append(r)
    summary = []
    for name in BATTERY:
        reps = by_test.get(name)
        if not reps:
            stderr.write(f"warning: sub-test {name} skipped (inapplicable to the input length)\n")
            continue
        if len(reps) < 1 / ns.nist_alpha or len(reps) < 50:
            stderr.write(f"warning: {name}: {len(reps)} sequences is too few for the two-level procedure\n")
            continue
        summary.append(two_level_evaluate(reps, ns.nist_alpha))
    _write_text(ns.out, two_level_to_csv(summary), stdout)
    if ns.out != "-":
        flat = [r for reports in per_seq for r in reports]
        _write_text(ns.out + ".sequences.csv", reports_to_csv(flat), stdout)
    for s in summary:
        stderr.write(f"{s.name:15s} pass_rate={s.pass_rate:.4f} (>= {s.pass_rate_threshold:.5f}) "
                     f"p_value_T={s.p_value_T:.4f} {'PASS' if s.passed else 'FAIL'}\n")
    return {"sequences": str(len(per_seq)),
            "all_passed": str(bool(summary) and all(s.passed for s in summary)).lower()}


def cmd_bench(ns, stdout, stderr) -> dict[str, str]:
    _resolve_seeds(ns)
    if ns.repeats < 1 or ns.bytes < 1:
        raise DomainError("--bytes and --repeats must be >= 1")
    # compile and warm caches outside the timed region
    generate_bytes(_make_pair(ns, ns.seed_a, ns.seed_b), 64)
    times = []
    for i in range(ns.repeats):
        seed_b = None if ns.seed_b is None else ns.seed_b + i
        pair = _make_pair(ns, ns.seed_a + i, seed_b)
        t0 = time.perf_counter()
        generate_bytes(pair, ns.bytes)
        times.append(time.perf_counter() - t0)
    t = np.array(times)
    rep = {
        "bytes": str(ns.bytes), "repeats": str(ns.repeats),
        "mean_ms": f"{t.mean() * 1e3:.3f}", "min_ms": f"{t.min() * 1e3:.3f}",
        "max_ms": f"{t.max() * 1e3:.3f}",
        "bits_per_second": f"{8 * ns.bytes / t.mean():.6g}",
    }
    _write_text(ns.out, "".join(f"{k}={v}\n" for k, v in rep.items()), stdout)
    return rep


# --------------------------------------------------------------------------
# parser / entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cmlprng", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="extract pseudo-random bits from two lattices")
    _add_lattice_args(p, z_default=64)
    _add_pair_args(p)
    p.add_argument("--bits", type=int, default=10**6)
    p.add_argument("--format", choices=["raw", "ascii"], default="raw")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("le", help="analytic Lyapunov spectrum (optionally with numeric check)")
    _add_lattice_args(p)
    p.add_argument("--le-f", type=float, default=None, help="local-map LE (default: estimate it)")
    p.add_argument("--local-iter", type=int, default=10**6)
    p.add_argument("--numeric", action="store_true", help="append QR-method estimates")
    p.add_argument("--unsynchronized", action="store_true", help="numeric check on a generic orbit")
    p.add_argument("--n-iter", type=int, default=10**5)
    p.add_argument("--n-discard", type=int, default=10**3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_le)

    p = sub.add_parser("bifurcation", help="orbit of one node across a parameter sweep")
    _add_lattice_args(p)
    p.add_argument("--mu-min", type=float, default=None)
    p.add_argument("--mu-max", type=float, default=None)
    p.add_argument("--mu-steps", type=int, default=300)
    p.add_argument("--points", type=int, default=100, help="points per parameter value")
    p.add_argument("--discard", type=int, default=1000)
    p.add_argument("--node", default="1,1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bifurcation)

    p = sub.add_parser("hist", help="histogram of a node orbit or of values read from a file")
    _add_lattice_args(p)
    p.add_argument("--input", default=None, help="text file with one value per line")
    p.add_argument("--points", type=int, default=10**6)
    p.add_argument("--discard", type=int, default=1000)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--node", default="1,1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("test", help="internal battery + two-level evaluation")
    _add_lattice_args(p, z_default=64)
    _add_pair_args(p)
    p.add_argument("--sequences", type=int, default=1000)
    p.add_argument("--length", type=int, default=10**6)
    p.add_argument("--nist-alpha", type=float, default=0.01)
    p.add_argument("--block-len", type=int, default=128)
    p.add_argument("--input", default=None, help="test an existing bit file instead")
    p.add_argument("--input-format", choices=["raw", "ascii"], default="ascii")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("bench", help="time generation of a block of bytes")
    _add_lattice_args(p, z_default=64)
    _add_pair_args(p)
    p.add_argument("--bytes", type=int, default=1 << 20)
    p.add_argument("--repeats", type=int, default=1000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest_file")
    p.add_argument("--out", default=None, help="override the recorded output path")

    for name, sp in sub.choices.items():
        if name != "replay":
            sp.add_argument("--manifest", default=None, help="manifest path (default: OUT.manifest)")
    return parser


def _replay_argv(ns) -> list[str]:
    with open(ns.manifest_file, encoding="utf-8") as fh:
        man = RunManifest.from_text(fh.read())
    argv = list(man.argv)
    if ns.out is not None:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = ns.out
        else:
            argv += ["--out", ns.out]
    return argv


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_help(stderr)
            return EXIT_USAGE
        if ns.command == "replay":
            return run(_replay_argv(ns), stdout, stderr)
        if getattr(ns, "z", 0) is None:
            ns.z = 64 if ns.arith == "fixed" else 52
        t0 = time.perf_counter()
        info = dict(ns.func(ns, stdout, stderr))
        if hasattr(ns, "seed_a"):
            info["seed_expansion"] = SEED_EXPANSION
        sub = parser._subparsers._group_actions[0].choices[ns.command]
        man = RunManifest(ns.command, _canonical_argv(sub, ns.command, ns), info,
                          duration_s=time.perf_counter() - t0)
        path = _manifest_path(ns)
        if path is None:
            stderr.write(man.to_text())
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(man.to_text())
        return EXIT_OK
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (DomainError, ValueError) as exc:
        stderr.write(f"cmlprng: invalid argument: {exc}\n")
        return EXIT_USAGE
    except (IndependenceError, DegenerateOrbitError) as exc:
        stderr.write(f"cmlprng: {exc}\n")
        return EXIT_RUNTIME
    except OSError as exc:
        stderr.write(f"cmlprng: I/O error: {exc}\n")
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

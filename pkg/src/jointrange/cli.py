"""Command line front end.

Each command reads JSON inputs (formats in :mod:`jointrange.jsonio`), runs
one construction, writes its artifacts into ``--out`` and a
``manifest.json`` echoing the configuration, library version and wall time.
Exit status: 0 when the command's postconditions were verified, 1 when
``verify`` finds a mismatch, otherwise the ``exit_code`` of the raised
library error (2 input, 3 infeasible, 4 capacity, 5 numerical).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import sys
import time
from pathlib import Path

import numpy as np
import scipy.spatial

from . import __version__, jsonio
from .errors import InputError, JointRangeError
from .opcore import Frame, OperatorTuple, operator_norm, to_real

# ---------------------------------------------------------------------------
# output helpers


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    path.write_text(buf.getvalue())


def svg_projection(points: np.ndarray, labels: tuple[str, str], size: int = 400) -> str:
    """Static SVG: scatter of 2-D points plus their convex hull outline."""
    pts = np.asarray(points, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi - lo > 1e-12, hi - lo, 1.0)
    pad = 30

    def xy(p):
        u = pad + (p[0] - lo[0]) / span[0] * (size - 2 * pad)
        v = size - pad - (p[1] - lo[1]) / span[1] * (size - 2 * pad)
        return f"{u:.3f},{v:.3f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    hull = None
    if len(pts) >= 3:
        try:
            hull = scipy.spatial.ConvexHull(pts)
        except scipy.spatial.QhullError:
            hull = None
    if hull is not None:
        poly = " ".join(xy(pts[i]) for i in hull.vertices)
        parts.append(f'<polygon points="{poly}" fill="#dde8f5" stroke="#1f4e8c" stroke-width="1.5"/>')
    for p in pts:
        u, v = xy(p).split(",")
        parts.append(f'<circle cx="{u}" cy="{v}" r="2" fill="#1f4e8c"/>')
    parts.append(f'<text x="{size / 2:.0f}" y="{size - 8}" font-size="12" text-anchor="middle">{labels[0]}</text>')
    parts.append(
        f'<text x="12" y="{size / 2:.0f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 12 {size / 2:.0f})">{labels[1]}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def coordinate_labels(n: int) -> list[str]:
    out = []
    for j in range(1, n + 1):
        out += [f"Re_{j}", f"Im_{j}"]
    return out


# ---------------------------------------------------------------------------
# witness recomputation


def shift_orbit_deviation(model, frame: np.ndarray, target: np.ndarray, horizon: int) -> float:
    from .asym import compressed_powers

    mn = np.eye(target.shape[0], dtype=np.complex128)
    best = 0.0
    for _, comp in compressed_powers(model, frame, horizon):
        mn = mn @ target
        best = max(best, operator_norm(comp - mn))
    return best


def recompute_witness(w: dict, args) -> float:
    from .ranges import RangeWitness, RankKWitness

    kind = w.get("kind")
    if kind == "range":
        src = _tuple_or_reservoir(args)
        rw = RangeWitness(jsonio.point_from_json(w["point"]), jsonio.vector_from_json(w["vector"]), w["residual"])
        return rw.recompute(src)
    if kind == "rank-k":
        t = _need_tuple(args)
        kw = RankKWitness(jsonio.point_from_json(w["point"]), jsonio.frame_from_json(w["frame"]), w["residual"])
        return kw.recompute(t)
    if kind == "zenger":
        from .zenger import zenger_residuals

        ul = jsonio.matrix_from_json(w["vectors"])
        wv = jsonio.vector_from_json(w["w"])
        u = jsonio.vector_from_json(w["u"])
        res = zenger_residuals(ul, wv, u, w["alphas"])
        return float(max(res.max(), np.linalg.norm(u - ul @ wv), abs(np.linalg.norm(u) - 1)))
    if kind == "power-compression":
        if args.reservoir is None:
            raise InputError("power-compression witnesses need --reservoir")
        res = jsonio.reservoir_from_json(jsonio.load(args.reservoir))
        f = jsonio.frame_from_json(w["frame"])
        c = jsonio.matrix_from_json(w["contraction"])
        comp = res.compress(f)
        return max(operator_norm(comp[k - 1] - np.linalg.matrix_power(c, k)) for k in range(1, int(w["horizon"]) + 1))
    if kind == "shift-compression":
        if args.model is None:
            raise InputError("shift-compression witnesses need --model")
        model = jsonio.model_from_json(jsonio.load(args.model))
        f = jsonio.frame_from_json(w["frame"])
        return shift_orbit_deviation(model, np.asarray(f.columns), jsonio.matrix_from_json(w["target"]), int(w["horizon"]))
    raise InputError(f"unknown witness kind {kind!r}")


def _need_tuple(args) -> OperatorTuple:
    if args.tuple is None:
        raise InputError("--tuple is required")
    return jsonio.tuple_from_json(jsonio.load(args.tuple))


def _tuple_or_reservoir(args):
    if getattr(args, "tuple", None) is not None:
        return jsonio.tuple_from_json(jsonio.load(args.tuple))
    if getattr(args, "reservoir", None) is not None:
        return jsonio.reservoir_from_json(jsonio.load(args.reservoir))
    raise InputError("need --tuple or --reservoir")


# ---------------------------------------------------------------------------
# commands; each returns (ok, list of written files)


def cmd_range(args, out: Path):
    from .ranges import conv_hull_boundary, membership_in_range, sphere_directions, support_function

    t = _need_tuple(args)
    dirs = sphere_directions(2 * t.n, args.directions, args.seed)
    rows, pts = [], []
    for i, d in enumerate(dirs):
        val, x = support_function(t, d)
        p = to_real(t.quadratic_form(x))
        pts.append(p)
        rows.append([i, *map(float, d), float(val), *map(float, p)])
    header = ["dir_index"] + [f"t_{j + 1}" for j in range(2 * t.n)] + ["support_value"]
    header += [f"x_{j + 1}" for j in range(2 * t.n)]
    written = []
    write_csv(out / "range_boundary.csv", header, rows)
    written.append("range_boundary.csv")
    pts = np.array(pts)
    labels = coordinate_labels(t.n)
    for a, b in itertools.combinations(range(2 * t.n), 2):
        name = f"range_{labels[a]}_{labels[b]}.svg"
        (out / name).write_text(svg_projection(pts[:, [a, b]], (labels[a], labels[b])))
        written.append(name)
    ok = True
    if args.target is not None:
        target = jsonio.point_from_json(jsonio.load(args.target))
        w = membership_in_range(t, target, tol=args.tol, seed=args.seed)
        obj = {"kind": "range", **w.to_json()}
        jsonio.dump(obj, out / "witness.json")
        written.append("witness.json")
        ok = w.recompute(t) <= args.tol
    poly = conv_hull_boundary(t, args.directions, args.seed)
    jsonio.dump({"vertices": [list(map(float, v)) for v in poly.vertices]}, out / "range_vertices.json")
    written.append("range_vertices.json")
    return ok, written


def cmd_rank_k(args, out: Path):
    from .ranges import rank_k_membership, rank_k_nonempty_search

    t = _need_tuple(args)
    if args.target is not None:
        target = jsonio.point_from_json(jsonio.load(args.target))
        w = rank_k_membership(t, target, args.k, tol=args.tol, seed=args.seed)
    else:
        w = rank_k_nonempty_search(t, args.k, seed=args.seed, tol=args.tol)
    jsonio.dump({"kind": "rank-k", **w.to_json()}, out / "witness.json")
    return w.recompute(t) <= args.tol, ["witness.json"]


def cmd_zenger(args, out: Path):
    from .zenger import zenger_solve

    ul = jsonio.matrix_from_json(jsonio.load(args.vectors))
    alphas = jsonio.load(args.alphas)
    sol = zenger_solve(ul, alphas, tol=args.tol, seed=args.seed)
    obj = {
        "kind": "zenger",
        "vectors": jsonio.matrix_to_json(ul),
        "alphas": [float(a) for a in alphas],
        "w": jsonio.vector_to_json(sol.w),
        "u": jsonio.vector_to_json(sol.u),
        "residual": sol.max_residual,
    }
    jsonio.dump(obj, out / "witness.json")
    return sol.max_residual <= args.tol, ["witness.json"]


def cmd_interpolate(args, out: Path):
    from .construct import EigenData, interpolate_numerical_range

    res = jsonio.reservoir_from_json(jsonio.load(args.reservoir))
    target = jsonio.point_from_json(jsonio.load(args.target))
    eigen = EigenData.from_reservoir_base(res, seed=args.seed) if res.base is not None else None
    with open(out / "trace.jsonl", "w") as fh:
        w = interpolate_numerical_range(res, eigen, target, tol=args.tol, max_k=args.max_k, min_k=args.min_k, trace=fh)
    jsonio.dump({"kind": "range", **w.to_json()}, out / "witness.json")
    return w.recompute(res) <= args.tol, ["trace.jsonl", "witness.json"]


def cmd_pinch(args, out: Path):
    from .pinch import bourin_pinch

    res = jsonio.reservoir_from_json(jsonio.load(args.model))
    c = jsonio.matrix_from_json(jsonio.load(args.contraction))
    frame, report = bourin_pinch(res, c, args.n, args.rounding_delta, args.c, args.c_prime)
    jsonio.dump(
        {
            "kind": "power-compression",
            "frame": jsonio.frame_to_json(frame),
            "contraction": jsonio.matrix_to_json(c),
            "horizon": args.n,
            "residual": report.max_deviation,
        },
        out / "witness.json",
    )
    jsonio.dump(report.to_json(), out / "report.json")
    return report.max_deviation <= report.budget, ["witness.json", "report.json"]


def _shift_outputs(out: Path, frame: Frame, target: np.ndarray, diag, horizon: int, eps: float):
    jsonio.dump(
        {
            "kind": "shift-compression",
            "frame": jsonio.frame_to_json(frame),
            "target": jsonio.matrix_to_json(target),
            "horizon": horizon,
            "residual": diag.sup_value,
        },
        out / "witness.json",
    )
    (out / "report.csv").write_text(diag.to_csv([eps] * horizon))
    jsonio.dump(diag.to_json(), out / "diagnostics.json")
    return diag.sup_value <= eps, ["witness.json", "report.csv", "diagnostics.json"]


def cmd_compress(args, out: Path):
    from .asym import diagonal_compression

    model = jsonio.model_from_json(jsonio.load(args.model))
    lam = jsonio.vector_from_json(jsonio.load(args.lambdas))
    frame, diag = diagonal_compression(model, lam, args.eps, args.horizon, args.windows_per_vector, args.seed)
    return _shift_outputs(out, frame, np.diag(lam), diag, args.horizon, args.eps)


def cmd_match(args, out: Path):
    from .asym import match_contraction

    model = jsonio.model_from_json(jsonio.load(args.model))
    c = jsonio.matrix_from_json(jsonio.load(args.contraction))
    frame, ct, diag = match_contraction(model, c, args.eps, args.horizon, args.seed)
    return _shift_outputs(out, frame, ct, diag, args.horizon, args.eps)


def cmd_verify(args, out: Path):
    w = jsonio.load(args.witness)
    if not isinstance(w, dict) or "residual" not in w:
        raise InputError("witness file lacks a residual")
    got = recompute_witness(w, args)
    stored = float(w["residual"])
    ok = abs(got - stored) <= args.tol
    jsonio.dump({"kind": w.get("kind"), "stored": stored, "recomputed": float(got), "match": ok}, out / "verify.json")
    print(f"stored {stored:.6e} recomputed {got:.6e} {'match' if ok else 'MISMATCH'}")
    return ok, ["verify.json"]


COMMANDS = {
    "range": cmd_range,
    "rank-k": cmd_rank_k,
    "zenger": cmd_zenger,
    "interpolate": cmd_interpolate,
    "pinch": cmd_pinch,
    "compress": cmd_compress,
    "match": cmd_match,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jointrange", description="Joint and higher-rank numerical range toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, tol):
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=tol)

    p = sub.add_parser("range", help="boundary of conv W(T) by support functions")
    p.add_argument("--tuple", required=True)
    p.add_argument("--directions", type=int, default=256)
    p.add_argument("--target", help="optional point to certify as a member of W(T)")
    common(p, 1e-8)

    p = sub.add_parser("rank-k", help="rank-k witness for a target, or any rank-k point")
    p.add_argument("--tuple", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--target")
    common(p, 1e-7)

    p = sub.add_parser("zenger", help="weights w with <w_j u_j, u> = alpha_j")
    p.add_argument("--vectors", required=True, help="matrix JSON whose columns are u_j")
    p.add_argument("--alphas", required=True, help="JSON list of simplex weights")
    common(p, 1e-10)

    p = sub.add_parser("interpolate", help="unit vector hitting an interior target of a reservoir")
    p.add_argument("--reservoir", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--max-k", type=int, default=40)
    p.add_argument("--min-k", type=int, default=0)
    common(p, 1e-9)

    p = sub.add_parser("pinch", help="frame with (T^k)_L = C^k on a power reservoir")
    p.add_argument("--model", required=True, help="power reservoir JSON")
    p.add_argument("--contraction", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rounding-delta", type=float, default=0.0)
    p.add_argument("--c", type=float)
    p.add_argument("--c-prime", type=float)
    common(p, 1e-7)

    p = sub.add_parser("compress", help="diagonal compression of a truncated shift's power orbit")
    p.add_argument("--model", required=True, help="shift model JSON")
    p.add_argument("--lambdas", required=True, help="JSON list of [re, im] targets")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--horizon", type=int, default=300)
    p.add_argument("--windows-per-vector", type=int, default=1)
    common(p, 1e-9)

    p = sub.add_parser("match", help="match powers of a contraction inside a truncated shift")
    p.add_argument("--model", required=True, help="shift model JSON")
    p.add_argument("--contraction", required=True)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--horizon", type=int, default=300)
    common(p, 1e-9)

    p = sub.add_parser("verify", help="recompute a stored witness residual")
    p.add_argument("--witness", required=True)
    p.add_argument("--tuple")
    p.add_argument("--reservoir")
    p.add_argument("--model")
    common(p, 1e-9)
    return ap


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {k: v for k, v in sorted(vars(args).items())}
    start = time.perf_counter()
    code, written, error = 0, [], None
    try:
        ok, written = COMMANDS[args.command](args, out)
        code = 0 if ok else 1
    except JointRangeError as exc:
        code, error = exc.exit_code, f"{type(exc).__name__}: {exc}"
        print(error, file=sys.stderr)
    manifest = {
        "command": args.command,
        "config": config,
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "exit_code": code,
        "artifacts": written,
        "error": error,
    }
    jsonio.dump(manifest, out / "manifest.json")
    return code


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

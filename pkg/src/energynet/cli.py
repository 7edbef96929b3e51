"""``energynet`` command line."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from energynet.errors import DomainError, NetworkError, NumericalError, ParseError
from energynet.functions import VertexFunction
from energynet.graph_core import (
    load_network,
    make_geometric_integers,
    make_geometric_tree,
    save_network,
    truncate,
    validate,
)
from energynet.operators import energy, fmt

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

FAMILIES = {"zgeom": make_geometric_integers, "tree": make_geometric_tree}


class InvalidInput(Exception):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ENERGYNET_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def parse_radii(text: str) -> list[int]:
    """``"A..B"`` -> ``[A, ..., B]`` (empty when B < A); a single integer is also accepted."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return list(range(int(a), int(b) + 1))
        return [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radius range {text!r}, expected A..B") from None


def parse_vertex(net, token: str):
    if token.lstrip("-").isdigit() and int(token) in net:
        return int(token)
    if token in net:
        return token
    raise InvalidInput(f"unknown vertex {token!r}")


def _vector_spec(net, trunc, spec: str, seed: int) -> VertexFunction:
    kind, _, arg = spec.partition(":")
    if kind == "delta":
        x = parse_vertex(net, arg)
        if x not in trunc.index:
            raise InvalidInput(f"vertex {x!r} lies outside the truncation")
        return VertexFunction.delta(trunc, x)
    if kind == "random":
        return VertexFunction(trunc, np.random.default_rng(seed).normal(size=trunc.n))
    raise InvalidInput(f"unknown vector spec {spec!r} (use delta:<vertex> or random)")


def _load(path):
    net = load_network(path)
    problems = validate(net)
    if problems:
        raise InvalidInput("; ".join(f"{v.kind} at {v.where}: {v.detail}" for v in problems))
    return net


def _open_out(path):
    return open(path, "w", newline="") if path and path != "-" else _Stdout()


class _Stdout(io.StringIO):
    def __exit__(self, *exc):
        sys.stdout.write(self.getvalue())
        return super().__exit__(*exc)


def _write_csv(path, header, rows):
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _finite(rows):
    for row in rows:
        for v in row.values() if isinstance(row, dict) else row:
            if isinstance(v, float) and not math.isfinite(v):
                raise NumericalError("non-finite value in output")


# -- reports -----------------------------------------------------------------

REPORT_FIELDS = ("quantity", "radius", "value", "residual", "tolerance", "pass")


def report(results) -> str:
    """JSON summary with one record per result row."""
    records = [{k: r[k] for k in REPORT_FIELDS} for r in results]
    _finite(records)
    return json.dumps(records, indent=2, sort_keys=False) + "\n"


# -- subcommands ---------------------------------------------------------------

def cmd_gen(args):
    net = FAMILIES[args.family](args.c, args.size)
    data = save_network(net)
    if args.out and args.out != "-":
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode())
    return EXIT_OK


def cmd_validate(args):
    try:
        net = load_network(args.network)
    except ParseError as exc:
        problems = [{"kind": "parse", "where": [], "detail": str(exc)}]
    else:
        problems = [{"kind": v.kind, "where": list(v.where), "detail": v.detail} for v in validate(net)]
    summary = [{
        "quantity": "validation", "radius": None, "value": len(problems), "residual": None,
        "tolerance": 0, "pass": not problems, "violations": problems,
    }]
    text = json.dumps(summary, indent=2) + "\n"
    if args.out and args.out != "-":
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for p in problems:
        print(f"{p['kind']}: {p['where']} {p['detail']}", file=sys.stderr)
    return EXIT_OK if not problems else EXIT_INVALID


def cmd_kernel(args):
    from energynet.kernels import energy_kernel, monopoles

    net = _load(args.network)
    trunc = truncate(net, net.origin, args.radius, args.mode)
    fam = monopoles(trunc) if trunc.wired else energy_kernel(trunc)
    rows = []
    for x in trunc.interior:
        col = fam.matrix[:, trunc.index[x]]
        rows.extend((x, y, fmt(col[j])) for j, y in enumerate(trunc.interior))
    _write_csv(args.out, ["x", "vertex", "value"], rows)
    return EXIT_OK


def cmd_spectrum(args):
    from energynet.extensions import friedrichs_compare, krein_spectral_measures

    net = _load(args.network)
    trunc = truncate(net, net.origin, args.radius, args.mode)
    xi = _vector_spec(net, trunc, args.xi, args.seed)
    pair = krein_spectral_measures(trunc, xi)
    rows = [("ell2", *r) for r in pair.ell2.to_rows()] + [("krein", *r) for r in pair.krein.to_rows()]
    if trunc.wired:
        rows += [("friedrichs", *r) for r in friedrichs_compare(trunc, xi).friedrichs.to_rows()]
    _write_csv(args.out, ["side", "lambda", "weight"], rows)
    dl, dw = pair.deviation()
    ok = max(dl, dw) <= args.tol_spec
    print(json.dumps({"lambda_rel_gap": dl, "weight_gap": dw, "pass": ok}), file=sys.stderr)
    return EXIT_OK


def cmd_defect(args):
    from energynet.harmonics import defect_vector_Z

    if args.family != "zgeom":
        raise InvalidInput("defect vectors are generated for the zgeom family")
    d = defect_vector_Z(args.c, args.n, args.f1)
    rows = [(n, fmt(d.f[n]), fmt(d.partial_energies[abs(n)])) for n in d.f.trunc.interior]
    _finite(rows)
    _write_csv(args.out, ["n", "f", "partial_energy"], rows)
    return EXIT_OK


def cmd_green(args):
    from energynet.green import green_apply

    net = _load(args.network)
    trunc = truncate(net, net.origin, args.radius, "wired")
    f = _vector_spec(net, trunc, args.f, args.seed)
    g = green_apply(trunc, f)
    rows = [(x, fmt(f.values[i]), fmt(g.values[i])) for i, x in enumerate(trunc.interior)]
    _write_csv(args.out, ["vertex", "f", "Gf"], rows)
    return EXIT_OK


def _sweep_point(family, c, quantity, radius, tol):
    from energynet.harmonics import defect_vector_Z, geometric_harmonic

    if family != "zgeom":
        raise InvalidInput("sweeps are defined for the zgeom family")
    net = make_geometric_integers(c, radius + 2)
    if quantity == "h-energy":
        trunc = truncate(net, 0, radius, "free")
        value = energy(trunc, geometric_harmonic(c, trunc=trunc))
        target = 2 * (c - 1)
        tail = 2 * (c - 1) * c ** (-radius)
        residual = abs(value - target)
        tolerance = tail * (1 + 1e-9) + tol * target
    elif quantity == "monopole":
        from energynet.kernels import solve_monopole

        trunc = truncate(net, 0, radius, "wired")
        value = solve_monopole(trunc, 0)[0]
        residual = float("nan")
        tolerance = tol
    elif quantity == "defect-energy":
        value = float(defect_vector_Z(c, max(radius, 2)).partial_energies[radius])
        residual = float("nan")
        tolerance = tol
    elif quantity == "green-energy":
        from energynet.green import green_apply

        trunc = truncate(net, 0, radius, "wired")
        value = energy(trunc, green_apply(trunc, VertexFunction.delta(trunc, 0)))
        residual = float("nan")
        tolerance = tol
    else:
        raise InvalidInput(f"unknown quantity {quantity!r}")
    return {"quantity": quantity, "radius": radius, "value": float(value), "residual": residual,
            "tolerance": float(tolerance), "pass": None}


def run_sweep(family, c, quantity, radii, tol):
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda r: _sweep_point(family, c, quantity, r, tol), radii))
    for i, row in enumerate(rows):
        if math.isnan(row["residual"]):
            # no closed form: the change from the previous radius
            row["residual"] = abs(row["value"] - rows[i - 1]["value"]) if i else abs(row["value"])
        row["pass"] = bool(row["residual"] <= row["tolerance"])
    return rows


def cmd_sweep(args):
    rows = run_sweep(args.family, args.c, args.quantity, args.radii, args.tol)
    _finite(rows)
    _write_csv(args.out, list(REPORT_FIELDS), [
        (r["quantity"], r["radius"], fmt(r["value"]), fmt(r["residual"]), fmt(r["tolerance"]), str(r["pass"]).lower())
        for r in rows
    ])
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report(rows))
    return EXIT_OK


def cmd_report(args):
    with open(args.results, newline="") as fh:
        rows = []
        for rec in csv.DictReader(fh):
            rows.append({
                "quantity": rec["quantity"], "radius": int(rec["radius"]), "value": float(rec["value"]),
                "residual": float(rec["residual"]), "tolerance": float(rec["tolerance"]),
                "pass": rec["pass"] == "true",
            })
    text = report(rows)
    if args.out and args.out != "-":
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="energynet", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, radius=True):
        if radius:
            sp.add_argument("--radius", type=int, required=True)
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--out", default=None)

    g = sub.add_parser("gen", help="generate an example network")
    g.add_argument("--family", choices=sorted(FAMILIES), required=True)
    g.add_argument("--c", type=float, required=True)
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("validate", help="check a network document")
    v.add_argument("network")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_validate)

    k = sub.add_parser("kernel", help="energy kernel (free) or monopoles (wired)")
    k.add_argument("network")
    k.add_argument("--mode", choices=["free", "wired"], default="free")
    common(k)
    k.set_defaults(func=cmd_kernel)

    s = sub.add_parser("spectrum", help="l2, Krein and Friedrichs spectral measures")
    s.add_argument("network")
    s.add_argument("--xi", default="random")
    s.add_argument("--mode", choices=["free", "wired"], default="wired")
    s.add_argument("--tol-spec", type=float, default=1e-8)
    common(s)
    s.set_defaults(func=cmd_spectrum)

    d = sub.add_parser("defect", help="defect vector on the geometric integers")
    d.add_argument("--family", choices=["zgeom"], default="zgeom")
    d.add_argument("--c", type=float, required=True)
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--f1", type=float, default=1.0)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_defect)

    gr = sub.add_parser("green", help="apply the Green operator on a wired truncation")
    gr.add_argument("network")
    gr.add_argument("--f", default="random")
    common(gr)
    gr.set_defaults(func=cmd_green)

    sw = sub.add_parser("sweep", help="a quantity across truncation radii")
    sw.add_argument("--family", choices=sorted(FAMILIES), default="zgeom")
    sw.add_argument("--c", type=float, required=True)
    sw.add_argument("--quantity", choices=["h-energy", "monopole", "defect-energy", "green-energy"], required=True)
    sw.add_argument("--radii", type=parse_radii, required=True)
    sw.add_argument("--report", default=None, help="also write a JSON summary here")
    common(sw, radius=False)
    sw.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="JSON summary of a sweep CSV")
    r.add_argument("results")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInput, NetworkError, DomainError, OSError) as exc:
        print(f"energynet: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"energynet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit status: 0 success, 1 bad input or configuration, 2 the bounds check
found violations (report still written), 3 a computation was refused
because a transform is not monotone.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from collections.abc import Sequence

import numpy as np

from .black_scholes import ForwardContext
from .bounds import check_smile, mass_at_zero_bound
from .errors import NoBracket, NormVolError, NotMonotone
from .oracle import corpus_model, gen_smile, load_corpus, replication_expectation
from .payoffs import parse_payoff
from .pricing import ZGrid, gamma_swap_strike, price, variance_swap_strike
from .smile import CONVENTIONS, TailPolicy, infer_convention, read_smile_csv
from .transforms import fixed_point, g_inverse, normalized_vols, transform_grid

EXIT_OK, EXIT_INPUT, EXIT_VIOLATIONS, EXIT_REFUSED = 0, 1, 2, 3
FMT = "%.12g"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 is reserved for violations here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _num(x) -> str:
    return FMT % x


def _jnum(x):
    """Round to 12 significant digits; non-finite values become null."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(FMT % x) if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _jnum(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jnum(v) for v in x]
    return x


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(_jnum(obj), indent=2, sort_keys=False) + "\n"


def _grid_arg(text: str, flag: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        out = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"{flag} must look like lo:hi:n, got {text!r}") from None
    if not out[0] < out[1] or out[2] < 2:
        raise UsageError(f"{flag} needs lo < hi and n >= 2, got {text!r}")
    return out


def _tail(args) -> TailPolicy:
    if args.tail == "flat":
        return TailPolicy()
    if args.q_left is None and args.q_right is None:
        raise UsageError("--tail lee needs --q-left and/or --q-right")
    return TailPolicy("lee_wing", args.q_left, args.q_right)


def _header(path: str) -> list[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.strip() and not line.lstrip().startswith("#"):
                return next(csv.reader([line]))
    raise UsageError(f"{path}: no header row")


def _load(args):
    convention = args.convention or infer_convention(_header(args.input))
    if convention in ("iv-annual", "put-price") and args.forward is None:
        raise UsageError(f"--forward is required for {convention} quotes")
    if convention == "iv-annual" and args.expiry_years is None:
        raise UsageError("--expiry-years is required for iv-annual quotes")
    forward = 1.0 if args.forward is None else args.forward
    try:
        ctx = ForwardContext(forward)
    except ValueError as exc:
        raise UsageError(f"--forward: {exc}") from None
    return read_smile_csv(args.input, ctx, convention, expiry_years=args.expiry_years, tail=_tail(args))


def _zgrid(args) -> ZGrid:
    if args.z_grid is None:
        return ZGrid()
    return ZGrid(*_grid_arg(args.z_grid, "--z-grid"))


def _cmd_check(args) -> tuple[str, int]:
    smile = _load(args)
    report = check_smile(smile, args.q_left, args.q_right, args.k_star_left, args.k_star_right)
    mass = mass_at_zero_bound(smile)
    if args.format == "json":
        body = report.to_dict()
        body["mass_at_zero_bound"] = mass
        text = _json_text(body)
    else:
        rows = []
        for c in report.checks:
            lo, hi = c.location.values()
            rows.append([c.name, "z" if "z_lo" in c.location else "k", float(lo), float(hi), float(c.margin), str(c.passed).lower(), str(c.heuristic).lower()])
        text = _csv_text(["check", "axis", "lo", "hi", "margin", "passed", "heuristic"], rows)
        text += f"# overall={report.overall}\n# mass_at_zero_bound={_num(mass)}\n"
        text += "".join(f"# {n}\n" for n in report.notes)
    return text, EXIT_OK if report.clean else EXIT_VIOLATIONS


def _cmd_transform(args) -> tuple[str, int]:
    smile = _load(args)
    grid = transform_grid(smile, args.n)
    z = np.linspace(*_grid_arg(args.z_grid or "-5:5:101", "--z-grid"))
    g1 = g_inverse("first", smile, z)
    g2 = g_inverse("second", smile, z)
    s1, s2 = smile.sigma_at(g1), smile.sigma_at(g2)
    fps = [fixed_point(w, smile) for w in ("first", "second")]
    if args.format == "json":
        text = _json_text(
            {
                "k_table": [dict(zip(("k", "sigma", "f1", "f2"), r)) for r in grid.rows],
                "z_table": [dict(zip(("z", "sigma1", "sigma2", "g1", "g2"), r)) for r in zip(z, s1, s2, g1, g2)],
                "fixed_points": {f"z_star_{1 if fp.which == 'first' else 2}": fp.z for fp in fps},
            }
        )
    else:
        text = _csv_text(["k", "sigma", "f1", "f2"], grid.rows)
        text += "\n" + _csv_text(["z", "sigma1", "sigma2", "g1", "g2"], zip(z, s1, s2, g1, g2))
        for fp in fps:
            label = "z_star_1" if fp.which == "first" else "z_star_2"
            text += f"# {label}={_num(fp.z) if fp.z is not None else fp.reason}\n"
    return text, EXIT_OK


def _result_dict(res) -> dict:
    return {
        "value": res.value,
        "z_integral_part": res.z_integral_part,
        "k_integral_part": res.k_integral_part,
        "tail_contribution": res.tail_contribution,
        "diagnostics": res.diagnostics,
    }


def _cmd_price(args) -> tuple[str, int]:
    if (args.swap is None) == (args.payoff is None):
        raise UsageError("price needs exactly one of --swap or --payoff")
    payoff = _payoff(args.payoff) if args.payoff else None
    smile = _load(args)
    zgrid = _zgrid(args)
    if args.swap == "variance":
        res = variance_swap_strike(smile, zgrid)
    elif args.swap == "gamma":
        res = gamma_swap_strike(smile, zgrid)
    else:
        res = price(smile, payoff, args.measure, zgrid, None if args.method == "auto" else args.method)
    out = _result_dict(res)
    if args.format == "json":
        return _json_text(out), EXIT_OK
    scalars = [(k, v) for k, v in out.items() if k != "diagnostics"]
    text = _csv_text([k for k, _ in scalars], [[float(v) for _, v in scalars]])
    text += "".join(f"# {k}={v}\n" for k, v in res.diagnostics.items())
    return text, EXIT_OK


def _payoff(text: str):
    try:
        return parse_payoff(text)
    except (ValueError, OSError) as exc:
        raise UsageError(f"--payoff: {exc}") from None


def _cmd_synth(args) -> tuple[str, int]:
    try:
        model = corpus_model(args.model)
    except KeyError:
        names = ", ".join(m.name for m in load_corpus())
        raise UsageError(f"--model: unknown model {args.model!r} (known: {names})") from None
    kgrid = np.linspace(*_grid_arg(args.k_grid, "--k-grid"))
    smile = gen_smile(model, kgrid)
    text = f"# model={model.name}\n# forward={_num(model.forward)}\n"
    text += _csv_text(["k", "total_vol"], zip(smile.k, smile.sigma))
    return text, EXIT_OK


def _cmd_replicate(args) -> tuple[str, int]:
    payoff = _payoff(args.payoff)
    if payoff.d2psi is None:
        raise UsageError(f"--payoff {args.payoff}: replication needs a second derivative")
    smile = _load(args)
    res = price(smile, payoff, "cash", _zgrid(args))
    rep = replication_expectation(smile, payoff)
    gap = abs(res.value - rep) / max(abs(rep), 1e-300)
    row = {"payoff": payoff.name, "z_space": res.value, "replication": rep, "relative_gap": gap}
    if args.format == "json":
        return _json_text(row), EXIT_OK
    return _csv_text(list(row), [list(row.values())]), EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="normvol", description="Smile diagnostics and payoff pricing in normalized coordinates.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def smile_cmd(name, help_text):
        c = sub.add_parser(name, help=help_text)
        c.add_argument("input", help="quote CSV")
        c.add_argument("--forward", type=float, help="forward price (required for strike-based conventions)")
        c.add_argument("--expiry-years", type=float, help="year fraction (required for iv-annual)")
        c.add_argument("--convention", choices=CONVENTIONS, help="quote convention (inferred from the header when omitted)")
        c.add_argument("--tail", choices=("flat", "lee"), default="flat")
        c.add_argument("--q-left", type=float)
        c.add_argument("--q-right", type=float)
        _common_out(c)
        return c

    c = smile_cmd("check", "run the no-arbitrage bounds")
    c.add_argument("--k-star-left", type=float, help="anchor for the refined left slope bound")
    c.add_argument("--k-star-right", type=float, help="anchor for the refined right slope bound")

    c = smile_cmd("transform", "emit f1/f2 and normalized-vol tables")
    c.add_argument("--n", type=int, help="uniform k-grid size (default: dense scan)")
    c.add_argument("--z-grid", help="lo:hi:n for the z-table (default -5:5:101)")

    c = smile_cmd("price", "price a swap or payoff")
    c.add_argument("--swap", choices=("variance", "gamma"))
    c.add_argument("--payoff", help="log, power:n, exp:a, forward, k_exp, const[:c] or table:path")
    c.add_argument("--measure", choices=("cash", "share"), default="cash")
    c.add_argument("--method", choices=("auto", "smooth", "ac"), default="auto")
    c.add_argument("--z-grid", help="lo:hi:n (default -8:8:401)")

    c = smile_cmd("replicate", "compare z-space pricing with strike-space replication")
    c.add_argument("--payoff", required=True)
    c.add_argument("--z-grid", help="lo:hi:n (default -8:8:401)")

    c = sub.add_parser("synth", help="write the smile of a corpus model")
    c.add_argument("--model", required=True)
    c.add_argument("--k-grid", default="-2.5:2.5:201", help="lo:hi:n")
    _common_out(c)
    return p


def _common_out(c):
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--output", help="write here instead of stdout")


COMMANDS = {
    "check": _cmd_check,
    "transform": _cmd_transform,
    "price": _cmd_price,
    "synth": _cmd_synth,
    "replicate": _cmd_replicate,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors already mapped to status 1; --help exits 0
        return int(exc.code or 0)
    try:
        text, status = COMMANDS[args.command](args)
    except (NotMonotone, NoBracket) as exc:
        print(f"normvol {args.command}: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (UsageError, NormVolError, ValueError, OSError) as exc:
        print(f"normvol {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"normvol {args.command}: error: --output: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())

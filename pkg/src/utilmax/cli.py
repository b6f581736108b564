"""Command-line front end: scenario solves, sweeps, norms, reproductions.

Thin client over the service handlers (called in-process, no socket).
Subcommands: solve, duality-check, orlicz norm|classify, reproduce,
truncation-study, serve.  Machine output goes through --csv with fixed
%.12g formatting, so identical seeds and specs give byte-identical files.
Exit codes: 0 all assertions passed, 1 assertion or solver failure,
2 input error.  Set UTILMAX_LOG=debug|info|warning to adjust logging.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from pydantic import ValidationError

from .errors import (
    CalibrationError,
    InputError,
    UnsupportedAsymptoticsError,
    UtilmaxError,
)
from .service import handlers
from .service.schemas import (
    ClassifyRequest,
    DualityCheckRequest,
    OrliczNormRequest,
    ReproduceRequest,
    ScenarioDocument,
    TruncationRequest,
    UtilitySpec,
)

log = logging.getLogger("utilmax")

_CSV_COLUMNS = (
    "seed",
    "value_primal",
    "value_dual",
    "gap",
    "budget_residual",
    "lambda_star",
)


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        return "%.12g" % v
    return str(v)


def _print_kv(pairs) -> None:
    width = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        print(f"{k.ljust(width)}  {_fmt(v)}")


def _write_csv(path: str, rows: list[dict], columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(_fmt(row[c]) for c in columns)


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _utility_spec(args) -> UtilitySpec:
    return UtilitySpec(
        family=args.family,
        gamma=args.gamma,
        endpoint=args.endpoint,
        exponent=args.exponent,
    )


def _add_utility_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--family",
        default="exponential",
        choices=["exponential", "log_shifted", "power_shifted", "linear"],
    )
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--endpoint", type=float, default=-2.0)
    p.add_argument("--exponent", type=float, default=0.5)


def _parse_weights(text: str) -> dict:
    out = {}
    for part in text.split(","):
        n, _, w = part.partition(":")
        out[int(n)] = float(w)
    return out


def _report_row(r) -> dict:
    return {
        "seed": r.seed,
        "value_primal": r.value_primal,
        "value_dual": r.value_dual,
        "gap": r.gap,
        "budget_residual": r.budget_residual,
        "lambda_star": r.lambda_star,
    }


def _cmd_solve(args) -> int:
    doc = ScenarioDocument.model_validate(_load_json(args.file))
    rep = handlers.run_scenario(doc)
    pairs = [
        ("market", doc.market.kind),
        ("utility", rep.utility_family),
        ("seed", rep.seed),
        ("value_primal", rep.value_primal),
        ("value_dual", rep.value_dual),
        ("gap", rep.gap),
        ("budget_residual", rep.budget_residual),
        ("lambda_star", rep.lambda_star),
        ("first_order_residual", rep.first_order_residual),
        ("variational_residual", rep.variational_residual),
        ("membership_ok", rep.membership_ok),
        ("martingale_residual", rep.martingale_residual),
    ]
    if rep.pointwise_claim_error is not None:
        pairs.append(("pointwise_claim_error", rep.pointwise_claim_error))
    if rep.constrained_value is not None:
        pairs.append(("constrained_value", rep.constrained_value))
    pairs.append(("passed", rep.passed))
    _print_kv(pairs)
    if args.csv:
        _write_csv(args.csv, [_report_row(rep)], _CSV_COLUMNS)
    return 0 if rep.passed else 1


def _cmd_duality_check(args) -> int:
    req = DualityCheckRequest(
        trials=args.trials,
        seed=args.seed,
        paths=args.paths,
        assets=args.assets,
        x=args.x,
    )
    resp = handlers.run_duality_check(req)
    for r in resp.rows:
        status = "ok" if r.passed else "FAIL"
        print(
            f"seed {r.seed:4d}  {r.utility_family:<11s} value {_fmt(r.value_dual):>13s} "
            f"gap {_fmt(r.gap):>10s}  budget {_fmt(r.budget_residual):>10s}  {status}"
        )
    print(f"{sum(r.passed for r in resp.rows)}/{len(resp.rows)} instances passed")
    if args.csv:
        _write_csv(args.csv, [_report_row(r) for r in resp.rows], _CSV_COLUMNS)
    return 0 if resp.all_passed else 1


def _cmd_orlicz(args) -> int:
    if args.orlicz_cmd == "norm":
        req = OrliczNormRequest(
            utility=_utility_spec(args),
            values=args.values,
            probs=args.probs,
            which=args.which,
        )
        resp = handlers.run_orlicz_norm(req)
        pairs = [
            ("luxemburg", resp.luxemburg),
            ("dual_amemiya", resp.dual_amemiya),
            ("sup_norm", resp.sup_norm),
        ]
        if resp.equivalence_lower is not None:
            pairs += [
                ("equivalence_lower", resp.equivalence_lower),
                ("equivalence_upper", resp.equivalence_upper),
                ("equivalence_ok", resp.equivalence_ok),
            ]
        _print_kv(pairs)
        return 0 if resp.equivalence_ok in (None, True) else 1
    req = ClassifyRequest(
        utility=_utility_spec(args),
        tail=args.tail,
        rate=args.rate,
        values=args.values,
        probs=args.probs,
    )
    resp = handlers.run_orlicz_classify(req)
    _print_kv(
        [
            ("verdict", resp.verdict),
            ("critical_scale", resp.critical_scale),
            ("numeric_agrees", resp.numeric_agrees),
            ("note", resp.note),
        ]
    )
    return 0 if resp.numeric_agrees else 1


def _cmd_reproduce(args) -> int:
    req = ReproduceRequest(
        nu=args.nu,
        rate=args.rate,
        horizon=args.horizon,
        p1=args.p1,
        p2=args.p2,
        single_atom=args.single_atom,
        weights=_parse_weights(args.weights) if args.weights else None,
        r=args.r,
        depth=args.depth,
    )
    out = handlers.run_reproduce(args.name, req)
    _print_kv(list(out.items()))
    return 0


def _cmd_truncation(args) -> int:
    req = TruncationRequest.model_validate(_load_json(args.file))
    resp = handlers.run_truncation_study(req)
    cols = ("level", "value_dual", "value_primal", "gap", "lambda_star", "expected_gain")
    print("  ".join(c.rjust(14) for c in cols))
    rows = []
    for r in resp.rows:
        row = {c: getattr(r, c) for c in cols}
        rows.append(row)
        print("  ".join(_fmt(row[c]).rjust(14) for c in cols))
    tail = [
        ("analytic_value", resp.analytic_value),
        ("analytic_regular_mean", resp.analytic_regular_mean),
        ("direction", resp.direction),
        ("monotone", resp.monotone),
        ("converging", resp.converging),
    ]
    _print_kv(tail)
    if args.csv:
        _write_csv(args.csv, rows, cols)
    ok = resp.monotone and resp.converging in (None, True)
    return 0 if ok else 1


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="utilmax",
        description="Utility maximization on finite markets via convex duality.",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    ps = sub.add_parser("solve", help="run one scenario document")
    ps.add_argument("file", metavar="FILE", help="JSON scenario document")
    ps.add_argument("--csv", help="write machine-readable row to PATH")
    ps.set_defaults(fn=_cmd_solve)

    pd = sub.add_parser("duality-check", help="seeded random-market sweep")
    pd.add_argument("--trials", type=int, default=10)
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--paths", type=int, default=6, help="max states per market")
    pd.add_argument("--assets", type=int, default=2)
    pd.add_argument("--x", type=float, default=0.0)
    pd.add_argument("--csv")
    pd.set_defaults(fn=_cmd_duality_check)

    po = sub.add_parser("orlicz", help="norms and loss-bound classification")
    osub = po.add_subparsers(dest="orlicz_cmd", required=True)
    pon = osub.add_parser("norm")
    pon.add_argument("--values", type=float, nargs="+", required=True)
    pon.add_argument("--probs", type=float, nargs="+")
    pon.add_argument("--which", choices=["loss", "conjugate"], default="loss")
    _add_utility_flags(pon)
    poc = osub.add_parser("classify")
    poc.add_argument(
        "--tail", choices=["gaussian", "two_sided_exponential", "cauchy"]
    )
    poc.add_argument("--rate", type=float, default=1.0)
    poc.add_argument("--values", type=float, nargs="+")
    poc.add_argument("--probs", type=float, nargs="+")
    _add_utility_flags(poc)
    po.set_defaults(fn=_cmd_orlicz)

    pr = sub.add_parser("reproduce", help="bundled scenarios ex35..ex38")
    pr.add_argument("name", choices=list(handlers.REPRODUCE_NAMES))
    pr.add_argument("--nu", type=float, default=2.0)
    pr.add_argument("--rate", type=float, default=1.0)
    pr.add_argument("--horizon", type=float, default=1.0)
    pr.add_argument("--p1", type=float, default=0.9)
    pr.add_argument("--p2", type=float, default=0.1)
    pr.add_argument("--single-atom", action="store_true")
    pr.add_argument("--weights", help="tail weights as n:w,n:w")
    pr.add_argument("--r", type=float, default=12.0)
    pr.add_argument("--depth", type=int, default=40)
    pr.set_defaults(fn=_cmd_reproduce)

    pt = sub.add_parser("truncation-study", help="finite truncation ladder")
    pt.add_argument("file", metavar="FILE", help="JSON study request")
    pt.add_argument("--csv")
    pt.set_defaults(fn=_cmd_truncation)

    pv = sub.add_parser("serve", help="start the HTTP service")
    pv.add_argument("--host", default="127.0.0.1")
    pv.add_argument("--port", type=int, default=8000)
    pv.set_defaults(fn=_cmd_serve)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("UTILMAX_LOG", "WARNING").upper(), 30)
    )
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as e:
        print(f"input error: malformed JSON at line {e.lineno} col {e.colno}: {e.msg}",
              file=sys.stderr)
        return 2
    except ValidationError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except (InputError, CalibrationError, UnsupportedAsymptoticsError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except UtilmaxError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except RuntimeError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

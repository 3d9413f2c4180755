"""Command-line front-end: one binary, one subcommand per pipeline stage.

Every run echoes its fully resolved configuration (plus a sha256 of it) next
to the results, writes outputs only after the computation succeeded, and maps
error classes to exit codes: 0 ok, 2 validation, 3 resolution exhausted,
4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .charges import (
    FormCharge,
    HolderChargeFn,
    LayerCakeCharge,
    exterior_derivative,
)
from .cubical import CubicalChain, DyadicGrid, mass
from .errors import FrachargeError, ValidationError
from .flatnorm import flat_norm
from .forms import SampledForm, form_from_json_dict, form_to_json_dict, load_form, save_form
from .genfun import (
    holder_exponent_estimate,
    midpoint_displacement,
    spec_for_alpha,
    weierstrass_sample,
)
from .mollify import Mollifier, dyadic_ladder, mollify_chain, smooth_charge
from .paraproduct import (
    DerivativeFactor,
    FormFactor,
    ParaproductState,
    wedge_eval,
    young_integral,
    zust_integral,
)


@dataclass
class RunConfig:
    """Fully resolved, serializable description of one CLI run."""

    subcommand: str
    options: dict
    threads: int = 1
    format: str = "json"
    version: str = __version__

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _echo(config: RunConfig, result: dict) -> dict:
    return {
        "config": asdict(config),
        "config_sha256": config.sha256(),
        "result": result,
    }


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def _load_chain(path) -> CubicalChain:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read chain file {path}: {exc}") from exc
    return CubicalChain.from_json(text)


def _load_samples(path) -> SampledForm:
    """Load a sampled 0-form from CSV (node index, value) or a form JSON."""
    path = Path(path)
    if path.suffix == ".json":
        return load_form(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read sample file {path}: {exc}") from exc
    header = {}
    values = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tokens in line[1:].split():
                if "=" in tokens:
                    k, v = tokens.split("=", 1)
                    header[k] = v
            continue
        idx, _, val = line.partition(",")
        try:
            values[int(idx)] = float(val)
        except ValueError as exc:
            raise ValidationError(f"bad CSV row {line!r}") from exc
    if not values:
        raise ValidationError(f"no samples in {path}")
    d = int(header.get("d", 1))
    if d != 1:
        raise ValidationError("CSV samples are 1-D; use form JSON for d >= 2")
    n = max(values) + 1
    if any(i not in values for i in range(n)):
        raise ValidationError("CSV node indices must cover 0..n without gaps")
    L = int(header.get("L", max(1, (n - 1).bit_length() - 1)))
    lo = int(header.get("lo", 0))
    grid = DyadicGrid(1, L, (lo,), (lo + n - 1,))
    arr = np.array([values[i] for i in range(n)])
    holder = None
    if "alpha" in header:
        holder = (float(header["alpha"]), float(header.get("lip", 0.0)))
    return SampledForm(grid, 0, {(): arr}, holder=holder)


def _save_samples(form: SampledForm, path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        save_form(form, path)
        return
    if form.grid.d != 1:
        raise ValidationError("CSV output is 1-D; use a .json path for d >= 2")
    lines = [
        f"# fracharge-sample d=1 L={form.grid.L} lo={form.grid.lo[0]}"
        + (
            f" alpha={form.holder[0]!r} lip={form.holder[1]!r}"
            if form.holder
            else ""
        )
    ]
    for i, v in enumerate(form.node_values()):
        lines.append(f"{i},{v!r}")
    path.write_text("\n".join(lines) + "\n")


def _build_charge(spec: dict, base_dir: Path):
    try:
        kind = spec["type"]
    except (KeyError, TypeError) as exc:
        raise ValidationError("charge spec needs a 'type' field") from exc
    if kind == "form":
        return FormCharge(load_form(base_dir / spec["form"]))
    if kind == "derivative":
        return exterior_derivative(_build_charge(spec["base"], base_dir))
    if kind == "wedge":
        omega = FormFactor(load_form(base_dir / spec["omega"]), spec.get("alpha"))
        eta = FormFactor(load_form(base_dir / spec["eta"]), spec.get("beta"))
        from .paraproduct import wedge_charge

        return wedge_charge(
            ParaproductState(omega, eta, tol=float(spec.get("tol", 1e-6)))
        )
    if kind == "layercake":
        weights = np.asarray(spec["weights"], dtype=float)
        grid = DyadicGrid(
            int(spec["d"]), int(spec["L"]), tuple(spec["lo"]), tuple(spec["hi"])
        )
        mu = HolderChargeFn(grid, weights.reshape(grid.shape), float(spec["alpha"]))
        return LayerCakeCharge(mu)
    raise ValidationError(f"unknown charge type {kind!r}")


def _report_csv(path, report):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in report.csv_rows():
            writer.writerow(row)


# -- subcommand handlers -------------------------------------------------------


def _cmd_flatnorm(args) -> dict:
    chain = _load_chain(args.chain)
    cert = flat_norm(chain, mode=args.mode, margin=args.margin)
    payload = {
        "value": float(cert.value),
        "filling": cert.filling.to_json_dict(),
        "remainder": cert.remainder.to_json_dict(),
    }
    if args.mode == "exact" and isinstance(cert.value, Fraction):
        payload["value_exact"] = f"{cert.value.numerator}/{cert.value.denominator}"
    return {"cert": payload, "outputs": {"cert": args.cert}}


def _cmd_mollify(args) -> dict:
    chain = _load_chain(args.chain)
    mol = Mollifier.for_grid(chain.grid, Fraction(args.eps), args.profile)
    out = mollify_chain(chain, mol)
    return {
        "epsilon": float(mol.epsilon),
        "mass_before": float(mass(chain)),
        "mass_after": float(mass(out)),
        "chain": out.to_json_dict(),
        "outputs": {"chain": args.out},
    }


def _cmd_eval(args) -> dict:
    spec = json.loads(Path(args.charge).read_text())
    charge = _build_charge(spec, Path(args.charge).parent)
    chain = _load_chain(args.chain)
    return {"value": charge.evaluate(chain)}


def _cmd_ladder(args) -> dict:
    form = load_form(args.form)
    charge = FormCharge(form)
    ladder = dyadic_ladder(charge, args.levels, form.grid, profile=args.profile)
    files = []
    for n, piece in enumerate(ladder):
        files.append(f"{args.out_prefix}_{n}.json")
    sups = [piece.sup_norm() for piece in ladder]
    return {
        "levels": args.levels,
        "sup_norms": sups,
        "outputs": {"forms": files},
        "_ladder": ladder,
    }


def _cmd_wedge(args) -> dict:
    omega_form = load_form(args.omega)
    eta_form = load_form(args.eta)
    chain = _load_chain(args.chain)
    omega = FormFactor(omega_form, args.alpha, args.profile)
    eta = FormFactor(eta_form, args.beta, args.profile)
    ps = ParaproductState(omega, eta, tol=args.tol)
    value, report = wedge_eval(ps, chain, args.tol)
    return {
        "value": value,
        "achieved_tol": report.achieved_tol,
        "truncation_level": report.truncation_level,
        "fitted_rate": report.fitted_rate,
        "theoretical_rate": report.theoretical_rate,
        "outputs": {"report": args.report},
        "_report": report,
    }


def _cmd_young(args) -> dict:
    f = _load_samples(args.f)
    g = _load_samples(args.g)
    value, report = young_integral(
        f, g, alpha=args.alpha, beta=args.beta, tol=args.tol,
        profile=args.profile, with_report=True,
    )
    out = {
        "value": value,
        "achieved_tol": report.achieved_tol,
        "truncation_level": report.truncation_level,
        "fitted_rate": report.fitted_rate,
    }
    if args.report:
        out["outputs"] = {"report": args.report}
        out["_report"] = report
    return out


def _cmd_zust(args) -> dict:
    f = _load_samples(args.f)
    gs = [_load_samples(p) for p in args.g.split(",")]
    alphas = None
    if args.alphas:
        alphas = [float(a) for a in args.alphas.split(",")]
    value, report = zust_integral(
        f, gs, alphas=alphas, tol=args.tol, profile=args.profile, with_report=True
    )
    out = {
        "value": value,
        "achieved_tol": report.achieved_tol,
        "truncation_level": report.truncation_level,
        "fitted_rate": report.fitted_rate,
    }
    if args.report:
        out["outputs"] = {"report": args.report}
        out["_report"] = report
    return out


def _cmd_gen(args) -> dict:
    grid = DyadicGrid(
        args.d, args.L,
        tuple([args.lo] * args.d),
        tuple([args.hi if args.hi is not None else (1 << args.L)] * args.d),
    )
    if args.kind == "weierstrass":
        spec = spec_for_alpha(args.alpha, frequency=args.b, grid=grid,
                              phases=tuple(args.phases or ()))
        form = weierstrass_sample(spec, grid)
    elif args.kind == "midpoint":
        # Non-normative seeded generator; not used by any guarantee.
        if args.seed is None:
            raise ValidationError("the midpoint generator requires --seed")
        form = midpoint_displacement(grid, args.alpha, args.seed)
    else:
        raise ValidationError(f"unknown generator kind {args.kind!r}")
    meta = {"alpha": form.holder[0], "lip": form.holder[1]} if form.holder else {}
    return {"kind": args.kind, "outputs": {"samples": args.out}, "_form": form, **meta}


def _cmd_estimate(args) -> dict:
    form = _load_samples(args.f)
    alpha_hat, lip_hat = holder_exponent_estimate(form)
    return {"alpha_hat": alpha_hat, "lip_hat": lip_hat}


HANDLERS = {
    "flatnorm": _cmd_flatnorm,
    "mollify": _cmd_mollify,
    "eval": _cmd_eval,
    "ladder": _cmd_ladder,
    "wedge": _cmd_wedge,
    "young": _cmd_young,
    "zust": _cmd_zust,
    "gen": _cmd_gen,
    "estimate": _cmd_estimate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracharge",
        description="fractional-charge calculus on dyadic cubical grids",
    )
    parser.add_argument("--threads", type=int, default=1, help="parallelism cap")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("flatnorm", help="flat norm with certificate")
    p.add_argument("--chain", required=True)
    p.add_argument("--mode", choices=("exact", "float"), default="float")
    p.add_argument("--margin", type=int, default=0)
    p.add_argument("--cert", required=True)

    p = sub.add_parser("mollify", help="mollify a chain")
    p.add_argument("--chain", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--profile", default="poly3")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a charge on a chain")
    p.add_argument("--charge", required=True)
    p.add_argument("--chain", required=True)
    p.add_argument("--out")

    p = sub.add_parser("ladder", help="dyadic decomposition of a form charge")
    p.add_argument("--form", required=True)
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--profile", default="poly3")
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("wedge", help="paraproduct wedge on a chain")
    p.add_argument("--omega", required=True)
    p.add_argument("--eta", required=True)
    p.add_argument("--chain", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--profile", default="poly3")
    p.add_argument("--report", required=True)
    p.add_argument("--out")

    p = sub.add_parser("young", help="Young integral of f dg on [0,1]")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--profile", default="poly3")
    p.add_argument("--report")
    p.add_argument("--out")

    p = sub.add_parser("zust", help="Zust integral of f dg_1 ^ ... ^ dg_d")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True, help="comma-separated integrator files")
    p.add_argument("--alphas", help="comma-separated exponents, f first")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--profile", default="poly3")
    p.add_argument("--report")
    p.add_argument("--out")

    p = sub.add_parser("gen", help="deterministic Hoelder sample generator")
    p.add_argument("--kind", choices=("weierstrass", "midpoint"), default="weierstrass")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--lo", type=int, default=0)
    p.add_argument("--hi", type=int, default=None)
    p.add_argument("--phases", type=float, nargs="*")
    p.add_argument("--seed", type=int, help="midpoint generator only (non-normative)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="empirical Hoelder exponent")
    p.add_argument("--f", required=True)
    p.add_argument("--out")

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    options = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("subcommand", "threads", "format") and not callable(v)
    }
    config = RunConfig(
        subcommand=args.subcommand,
        options=options,
        threads=args.threads,
        format=args.format,
    )
    try:
        result = HANDLERS[args.subcommand](args)
    except FrachargeError as exc:
        payload = {"error_class": exc.error_class, "message": str(exc)}
        if getattr(exc, "report", None) is not None:
            payload["truncation_level"] = exc.report.truncation_level
        print(json.dumps(payload), file=sys.stderr)
        return exc.exit_code

    # Deferred artifact writes: nothing touches disk unless the run succeeded.
    ladder = result.pop("_ladder", None)
    report = result.pop("_report", None)
    form = result.pop("_form", None)
    echo = _echo(config, result)
    if args.subcommand == "flatnorm":
        _write_json(args.cert, _echo(config, result["cert"]))
    if args.subcommand == "mollify":
        _write_json(args.out, _echo(config, result["chain"]))
    if args.subcommand == "ladder" and ladder is not None:
        for path, piece in zip(result["outputs"]["forms"], ladder):
            _write_json(path, form_to_json_dict(piece))
    if report is not None and getattr(args, "report", None):
        _report_csv(args.report, report)
    if form is not None:
        _save_samples(form, args.out)
    out_path = getattr(args, "out", None)
    if out_path and args.subcommand not in ("mollify", "gen"):
        _write_json(out_path, echo)
    print(json.dumps(echo))
    return 0


def run_from_config(payload: dict) -> int:
    """Re-execute a run from an echoed configuration (reproducibility hook)."""
    cfg = payload["config"] if "config" in payload else payload
    argv = ["--threads", str(cfg.get("threads", 1)), "--format", cfg.get("format", "json"),
            cfg["subcommand"]]
    for key, val in cfg["options"].items():
        if val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        if val is True:
            argv.append(flag)
        elif isinstance(val, (list, tuple)):
            argv.append(flag)
            argv.extend(str(v) for v in val)
        else:
            argv.extend([flag, str(val)])
    return run(argv)


def main() -> None:
    sys.exit(run())

"""Command-line interface.

Subcommands: simulate, fit, bootstrap, density, study, acf, round.
Every command takes --seed for bit-reproducible output.  Exit codes:
0 success, 1 usage error, 2 data validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .composite import CLMethod
from .errors import NumericalError, ValidationError
from .estimation import FitOptions, bootstrap, fit
from .io import read_track, write_track
from .mr_density import IncrementQuery, ModelParams, h_density, resting_atom
from .mrme_model import Track, g_density, round_track, simulate_mrme, transition_density
from .studies import acf, load_study_spec, run_study, study_preset
from .telegraph import RatePair, occupation_density, tau

_METHOD_FLAGS = {
    "twopiece": CLMethod.TWO_PIECE,
    "two_piece": CLMethod.TWO_PIECE,
    "marginal": CLMethod.MARGINAL,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise _UsageError(message)


def _add_params(p: argparse.ArgumentParser, noise=True):
    p.add_argument("--lambda1", type=float, required=True, help="rate of leaving the moving state (1/hour)")
    p.add_argument("--lambda0", type=float, required=True, help="rate of leaving the resting state (1/hour)")
    p.add_argument("--sigma", type=float, required=True, help="volatility while moving (km/sqrt(hour))")
    if noise:
        p.add_argument("--sigma-eps", type=float, default=0.0, help="measurement error SD (km)")


def _params_from(args, noise=True) -> ModelParams:
    eps = getattr(args, "sigma_eps", 0.0) if noise else 0.0
    return ModelParams(args.lambda1, args.lambda0, args.sigma, eps)


def build_parser() -> _Parser:
    parser = _Parser(prog="mrme", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a noisy moving-resting track")
    _add_params(p)
    p.add_argument("--horizon", type=float, required=True, help="length of the observation window (hours)")
    p.add_argument("--interval", type=float, required=True, help="sampling interval (hours)")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--init", default="stationary", choices=["stationary", "moving", "resting"])
    p.add_argument("--seed", type=np.uint64, default=None)
    p.add_argument("--output", default=None, help="CSV destination (stdout when omitted)")

    p = sub.add_parser("fit", help="fit the model to a track by composite likelihood")
    p.add_argument("--input", required=True)
    p.add_argument("--method", default="twopiece", choices=sorted(_METHOD_FLAGS))
    p.add_argument("--init", default=None, help="starting point lambda1,lambda0,sigma,sigma_eps")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--xtol", type=float, default=1e-6)
    p.add_argument("--ftol", type=float, default=1e-8)
    p.add_argument("--output", default=None, help="JSON report destination")

    p = sub.add_parser("bootstrap", help="parametric bootstrap standard errors")
    p.add_argument("--input", required=True)
    p.add_argument("--method", default="twopiece", choices=sorted(_METHOD_FLAGS))
    p.add_argument("--replications", "-M", type=int, default=50)
    p.add_argument("--seed", type=np.uint64, default=0)
    p.add_argument("--theta", default=None, help="fitted lambda1,lambda0,sigma,sigma_eps (fits first when omitted)")
    p.add_argument("--output", default=None)

    p = sub.add_parser("density", help="evaluate model densities and probabilities")
    p.add_argument("--kind", required=True, choices=["tau", "p", "h", "g", "f", "atom"])
    p.add_argument("--i", type=int, default=1, choices=[0, 1], help="starting state")
    p.add_argument("--j", type=int, default=1, choices=[0, 1], help="ending state")
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--lambda0", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--sigma-eps", type=float, default=0.0)
    p.add_argument("--t", type=float, default=None, help="window length (tau, p, h, g, atom)")
    p.add_argument("--w", type=float, default=None, help="occupation time (p)")
    p.add_argument("--dz", default=None, help="comma-separated displacement (h, g, f)")
    p.add_argument("--gap", type=float, default=0.0, help="leading gap u (f)")
    p.add_argument("--window", type=float, default=None, help="trailing window v (f)")
    p.add_argument("--output", default=None)

    p = sub.add_parser("study", help="run a replication study")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", default=None)
    group.add_argument("--config", default=None, help="JSON file mirroring StudySpec fields")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=np.uint64, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--bootstrap-m", type=int, default=None)
    p.add_argument("--output", default=None)

    p = sub.add_parser("acf", help="autocorrelation of absolute increments")
    _add_params(p)
    p.add_argument("--horizon", type=float, default=1e5)
    p.add_argument("--interval", type=float, required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=np.uint64, default=0)
    p.add_argument("--output", default=None)

    p = sub.add_parser("round", help="snap coordinates to a grid")
    p.add_argument("--input", required=True)
    p.add_argument("--grid", type=float, required=True)
    p.add_argument("--output", default=None, help="CSV destination (stdout when omitted)")
    return parser


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _emit(args, human: str, payload: dict) -> None:
    print(human)
    text = json.dumps(payload, indent=2, default=_json_default)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    else:
        print()
        print(text)


def _write_csv(track: Track, path: str | None) -> None:
    if path:
        write_track(track, path)
    else:
        names = ["x", "y", "z"] + [f"x{k}" for k in range(4, track.dim + 1)]
        print("time," + ",".join(names[: track.dim]))
        for t, row in zip(track.times, track.locations):
            print(",".join([repr(float(t))] + [repr(float(v)) for v in row]))


def _parse_theta(text: str) -> ModelParams:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 4:
        raise ValidationError("expected four comma-separated values lambda1,lambda0,sigma,sigma_eps")
    return ModelParams.from_array([float(p) for p in parts])


def _cmd_simulate(args) -> int:
    params = _params_from(args)
    n = int(round(args.horizon / args.interval))
    if n < 1:
        raise ValidationError("horizon must cover at least one interval")
    times = np.linspace(0.0, n * args.interval, n + 1)
    init = args.init if args.init == "stationary" else {"moving": 1, "resting": 0}[args.init]
    rng = np.random.default_rng(args.seed if args.seed is None else int(args.seed))
    labeled = simulate_mrme(params, times, dim=args.dim, init=init, rng=rng)
    _write_csv(labeled.track, args.output)
    return 0


def _fit_result_payload(result) -> dict:
    est = result.estimate
    return {
        "estimate": {
            "lambda1": est.lambda1,
            "lambda0": est.lambda0,
            "sigma": est.sigma,
            "sigma_eps": est.sigma_eps,
        },
        "converged": result.converged,
        "objective": result.objective,
        "n_evals": result.n_evals,
        "method": result.method.value if isinstance(result.method, CLMethod) else result.method,
    }


def _cmd_fit(args) -> int:
    track = read_track(args.input)
    init = _parse_theta(args.init) if args.init else None
    opts = FitOptions(
        method=_METHOD_FLAGS[args.method],
        init=init,
        max_iters=args.max_iters,
        xtol=args.xtol,
        ftol=args.ftol,
    )
    result = fit(track, opts)
    payload = {"command": "fit", "input": args.input, **_fit_result_payload(result)}
    est = result.estimate
    human = "\n".join(
        [
            "parameter   estimate",
            f"lambda1     {est.lambda1:.6g}",
            f"lambda0     {est.lambda0:.6g}",
            f"sigma       {est.sigma:.6g}",
            f"sigma_eps   {est.sigma_eps:.6g}",
            f"converged   {'yes' if result.converged else 'no'}",
            f"objective   {result.objective:.6f}",
            f"evaluations {result.n_evals}",
        ]
    )
    _emit(args, human, payload)
    return 0


def _cmd_bootstrap(args) -> int:
    track = read_track(args.input)
    opts = FitOptions(method=_METHOD_FLAGS[args.method])
    if args.theta:
        theta = _parse_theta(args.theta)
    else:
        first = fit(track, opts)
        if not first.converged:
            raise NumericalError("initial fit did not converge; pass --theta explicitly")
        theta = first.estimate
    boot = bootstrap(
        track.times, theta, M=args.replications, opts=opts, rng=int(args.seed), dim=track.dim
    )
    names = ["lambda1", "lambda0", "sigma", "sigma_eps"]
    lines = ["parameter   estimate      se          ci95_low      ci95_high"]
    theta_arr = theta.as_array()
    for k, name in enumerate(names):
        lines.append(
            f"{name:<11} {theta_arr[k]:<13.6g} {boot.se[k]:<11.4g} "
            f"{boot.ci[k, 0]:<13.6g} {boot.ci[k, 1]:<13.6g}"
        )
    if boot.notes:
        lines.append(f"note: {boot.notes}")
    payload = {
        "command": "bootstrap",
        "theta": dict(zip(names, theta_arr.tolist())),
        "se": dict(zip(names, boot.se.tolist())),
        "ci95": {n: boot.ci[k].tolist() for k, n in enumerate(names)},
        "n_failed": boot.n_failed,
        "degraded": boot.degraded,
        "notes": boot.notes,
        "replicates": [r.as_array().tolist() for r in boot.replicates],
    }
    _emit(args, "\n".join(lines), payload)
    return 0


def _cmd_density(args) -> int:
    rates = RatePair(args.lambda1, args.lambda0)
    kind = args.kind
    if kind == "tau":
        if args.t is None:
            raise _UsageError("--t is required for --kind tau")
        value = tau(args.i, args.j, args.t, rates)
    elif kind == "p":
        if args.t is None or args.w is None:
            raise _UsageError("--w and --t are required for --kind p")
        value = occupation_density(args.i, args.j, args.w, args.t, rates)
    elif kind == "atom":
        if args.t is None:
            raise _UsageError("--t is required for --kind atom")
        value = resting_atom(args.t, _params_from(args))
    else:
        if args.dz is None:
            raise _UsageError(f"--dz is required for --kind {kind}")
        dz = np.array([float(v) for v in args.dz.split(",")])
        params = _params_from(args)
        if kind == "f":
            v = args.window if args.window is not None else args.t
            if v is None:
                raise _UsageError("--window (or --t) is required for --kind f")
            value = transition_density(args.i, args.j, dz, args.gap, v, params)
        else:
            if args.t is None:
                raise _UsageError(f"--t is required for --kind {kind}")
            q = IncrementQuery(dz=dz, dt=args.t, dim=dz.size)
            value = h_density(args.i, args.j, q, params) if kind == "h" else g_density(
                args.i, args.j, q, params
            )
    payload = {"command": "density", "kind": kind, "value": value}
    _emit(args, f"{kind}[{args.i}->{args.j}] = {value!r}", payload)
    return 0


def _cmd_study(args) -> int:
    if args.config:
        spec = load_study_spec(args.config)
    else:
        spec = study_preset(args.preset)
    overrides = {}
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.seed is not None:
        overrides["seed"] = int(args.seed)
    if args.bootstrap_m is not None:
        overrides["bootstrap_m"] = args.bootstrap_m
    if overrides:
        from dataclasses import replace

        spec = replace(spec, **overrides)
    report = run_study(spec, threads=args.threads)
    print(report.human_table())
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(report.to_json() + "\n")
    else:
        print()
        print(report.to_json())
    return 0


def _cmd_acf(args) -> int:
    params = _params_from(args)
    acf1, acf2 = acf(params, args.horizon, args.interval, rng=int(args.seed), dim=args.dim)
    human = f"interval {args.interval}: ACF(1) = {acf1:.4f}, ACF(2) = {acf2:.4f}"
    payload = {
        "command": "acf",
        "interval": args.interval,
        "horizon": args.horizon,
        "acf1": acf1,
        "acf2": acf2,
    }
    _emit(args, human, payload)
    return 0


def _cmd_round(args) -> int:
    track = read_track(args.input)
    rounded = round_track(track, args.grid)
    _write_csv(rounded, args.output)
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "bootstrap": _cmd_bootstrap,
    "density": _cmd_density,
    "study": _cmd_study,
    "acf": _cmd_acf,
    "round": _cmd_round,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run 'mrme --help' for usage", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Groups: simulate {fp,ffwor,ffwr,impurity,birth}, estimate {pi1,pi4,theta,length},
scales {psi,t-infinity,exceptional,schedule,constants}, verify
{oracle,duality,invariants,scales}.  ``--config FILE`` reads ``key = value``
lines with the same names as the long flags; explicit flags win.
AVALANCHE_THREADS caps replica parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import formats, harness, scales


def _config_file_defaults(path: str) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"config line not key = value: {raw!r}")
        key, _, val = line.partition("=")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avalanche-lab")
    groups = ap.add_subparsers(dest="group", required=True)

    sim = groups.add_parser("simulate").add_subparsers(dest="cmd", required=True)
    for kind in ("fp", "ffwor", "ffwr", "impurity", "birth"):
        p = sim.add_parser(kind)
        _add_common(p)
        p.add_argument("--region", default="ball:16")
        p.add_argument("--replicas", type=int, default=1)
        p.add_argument("--radii", default="", help="comma list for F^(B_n) counts")
        if kind == "fp":
            p.add_argument("--N", dest="n_threshold", type=int, required=False)
            p.add_argument("--rule", default="original", choices=["original", "modified"])
        if kind in ("ffwor", "ffwr", "impurity"):
            p.add_argument("--zeta", type=float)
        if kind in ("ffwor", "ffwr"):
            p.add_argument("--horizon", type=float)
        if kind == "ffwor":
            p.add_argument("--truncation", type=float)
        if kind == "impurity":
            p.add_argument("--p", type=float)
            p.add_argument("--eps-bar", dest="eps_bar", type=float)
            p.add_argument("--m", dest="m_scale", type=float)
        if kind == "birth":
            p.add_argument("--times", default="0.5")

    est = groups.add_parser("estimate").add_subparsers(dest="cmd", required=True)
    for what in ("pi1", "pi4", "theta", "length"):
        p = est.add_parser(what)
        _add_common(p)
        p.add_argument("--samples", type=int, default=1000)
        if what in ("pi1", "pi4"):
            p.add_argument("--n", default="8,16,32")
        if what == "theta":
            p.add_argument("--p", type=float, required=True)
            p.add_argument("--n", default="64")
        if what == "length":
            p.add_argument("--p", type=float, required=True)

    sc = groups.add_parser("scales").add_subparsers(dest="cmd", required=True)
    for what in ("psi", "t-infinity", "exceptional", "schedule", "constants"):
        p = sc.add_parser(what)
        _add_common(p)
        p.add_argument("--model", choices=["fp", "ff"], required=True)
        p.add_argument("--N", type=float)
        p.add_argument("--zeta", type=float)
        p.add_argument("--ln-param", dest="ln_param", type=float,
                       help="ln N or ln(1/zeta) for log-domain work")
        if what == "psi":
            p.add_argument("--R", type=float, required=True)
        if what == "exceptional":
            p.add_argument("--k", type=int, default=10)
        if what == "schedule":
            p.add_argument("--alpha", type=float, default=1.0)
            p.add_argument("--kappa4", type=float, default=1.0)

    ver = groups.add_parser("verify").add_subparsers(dest="cmd", required=True)
    for what in ("oracle", "duality", "invariants", "scales"):
        p = ver.add_parser(what)
        _add_common(p)
    return ap


def _apply_config_file(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    defaults = _config_file_defaults(args.config)
    for key, val in defaults.items():
        if not hasattr(args, key):
            raise SystemExit(f"unknown config key {key!r}")
        cur = getattr(args, key)
        default_like = cur is None or any(
            a.dest == key and a.default == cur for a in _all_actions())
        if default_like:
            setattr(args, key, val)
    return args


_ACTIONS_CACHE = None


def _all_actions():
    global _ACTIONS_CACHE
    if _ACTIONS_CACHE is None:
        acts = []

        def walk(parser):
            for a in parser._actions:
                acts.append(a)
                if isinstance(a, argparse._SubParsersAction):
                    for sub in a.choices.values():
                        walk(sub)
        walk(build_parser())
        _ACTIONS_CACHE = acts
    return _ACTIONS_CACHE


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _float_list(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x]


def _model_param(args) -> float:
    if args.model == "fp":
        if args.N is None:
            raise SystemExit("--N required for model fp")
        return float(args.N)
    if args.zeta is None:
        raise SystemExit("--zeta required for model ff")
    return float(args.zeta)


def _emit(args, text: str, name: str):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args = _apply_config_file(args)

    if args.group == "simulate":
        cfg = harness.ExperimentConfig(
            kind=args.cmd,
            region=str(args.region),
            n_threshold=int(args.n_threshold) if getattr(args, "n_threshold", None) else None,
            rule=str(getattr(args, "rule", "original")),
            zeta=float(args.zeta) if getattr(args, "zeta", None) else None,
            horizon=float(args.horizon) if getattr(args, "horizon", None) else None,
            truncation=float(args.truncation) if getattr(args, "truncation", None) else None,
            p=float(args.p) if getattr(args, "p", None) is not None else None,
            eps_bar=float(args.eps_bar) if getattr(args, "eps_bar", None) else None,
            m_scale=float(args.m_scale) if getattr(args, "m_scale", None) else None,
            times=tuple(_float_list(args.times)) if getattr(args, "times", None) else (),
            replicas=int(args.replicas),
            seed=int(args.seed),
            radii=tuple(_int_list(args.radii)) if getattr(args, "radii", None) else (),
            out=args.out,
        )
        try:
            cfg.validate()
        except ValueError as e:
            print(f"invalid config: {e}", file=sys.stderr)
            return 2
        result = harness.run_experiment(cfg)
        if not args.out:
            sys.stdout.write(result.data_csv)
            sys.stdout.write(formats.dump_summary_json(result.manifest))
        return 0

    if args.group == "estimate":
        from . import percolation
        seed = int(args.seed)
        if args.cmd == "pi1":
            ests = percolation.estimate_connection_profile(
                0.5, _int_list(args.n), int(args.samples), seed)
            rows = ["n,estimate,ci_low,ci_high,samples"]
            for e in ests:
                rows.append(f"{e.n},{e.estimate!r},{e.ci[0]!r},{e.ci[1]!r},{e.samples}")
            _emit(args, "\n".join(rows) + "\n", "pi1.csv")
        elif args.cmd == "pi4":
            rows = ["n,estimate,ci_low,ci_high,samples"]
            for n in _int_list(args.n):
                e = percolation.estimate_pivotal(n, int(args.samples), seed)
                rows.append(f"{n},{e.estimate!r},{e.ci[0]!r},{e.ci[1]!r},{e.samples}")
            _emit(args, "\n".join(rows) + "\n", "pi4.csv")
        elif args.cmd == "theta":
            n = _int_list(args.n)[0]
            e = percolation.estimate_connection(float(args.p), n, int(args.samples), seed)
            _emit(args, f"p,n,estimate,ci_low,ci_high,samples\n"
                        f"{args.p},{n},{e.estimate!r},{e.ci[0]!r},{e.ci[1]!r},{e.samples}\n",
                  "theta.csv")
        elif args.cmd == "length":
            est = scales.characteristic_length_mc(float(args.p), seed)
            rows = ["p,length,capped", f"{args.p},{est.length},{int(est.capped)}",
                    "", "probe_n,successes,samples"]
            rows += [f"{n},{h},{s}" for n, h, s in est.probes]
            _emit(args, "\n".join(rows) + "\n", "length.csv")
        return 0

    if args.group == "scales":
        model = args.model
        manifest = {"model": model, "c_T": scales.C_T, "t_c": scales.T_C,
                    "a_fp": scales.A_FP, "a_ff": scales.A_FF,
                    "n_fp": scales.N_FP, "n_ff": scales.N_FF}
        if args.cmd == "psi":
            param = _model_param(args)
            t = scales.psi_fp(args.R, param) if model == "fp" else scales.psi_ff(args.R, param)
            _emit(args, f"R,param,time\n{args.R},{param},{t!r}\n", "psi.csv")
        elif args.cmd == "t-infinity":
            param = _model_param(args)
            fp = scales.t_infinity(model, param)
            _emit(args, "param,t_infinity,m_infinity,eps_infinity,crossings\n"
                        f"{param},{fp.t_infinity!r},{fp.m_infinity!r},{fp.eps_infinity!r},"
                        f"{';'.join(repr(c) for c in fp.crossings)}\n", "t_infinity.csv")
        elif args.cmd == "exceptional":
            param = _model_param(args)
            ms = scales.exceptional_scales(model, param, int(args.k))
            rows = ["k,m_k"] + [f"{i+1},{m!r}" for i, m in enumerate(ms)]
            _emit(args, "\n".join(rows) + "\n", "exceptional.csv")
        elif args.cmd == "schedule":
            if args.ln_param is not None:
                s = (scales.schedule_fp(ln_N=args.ln_param, alpha=args.alpha, kappa4=args.kappa4)
                     if model == "fp" else
                     scales.schedule_ff(ln_inv_zeta=args.ln_param, alpha=args.alpha))
            else:
                param = _model_param(args)
                s = (scales.schedule_fp(N=param, alpha=args.alpha, kappa4=args.kappa4)
                     if model == "fp" else scales.schedule_ff(zeta=param, alpha=args.alpha))
            rows = ["i,ln_r,ln_R,separation"]
            for i in range(s.J + 2):
                sep = s.separation[i] if i < len(s.separation) else ""
                rows.append(f"{i},{s.ln_r[i]!r},{s.ln_R[i]!r},{sep}")
            rows.append(f"# j={s.j} J={s.J} J/lnln={s.count_ratio!r} n={s.n_constant!r}")
            _emit(args, "\n".join(rows) + "\n", "schedule.csv")
            manifest.update({"j": s.j, "J": s.J, "count_ratio": s.count_ratio,
                             "alpha": s.alpha})
        elif args.cmd == "constants":
            param = _model_param(args)
            dc = scales.derived_constants(model, param)
            _emit(args, "param,t_infinity,m_infinity,v_infinity,zeta_ratio,a,n\n"
                        f"{param},{dc.t_infinity!r},{dc.m_infinity!r},{dc.v_infinity!r},"
                        f"{dc.zeta_ratio!r},{dc.a_exponent!r},{dc.n_constant!r}\n",
                  "constants.csv")
            manifest.update({"m_infinity": dc.m_infinity, "v_infinity": dc.v_infinity})
        if args.out:
            (Path(args.out) / "scales_manifest.json").write_text(
                json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        return 0

    if args.group == "verify":
        rep = harness.selftest(args.cmd)
        for line in rep.lines:
            print(line)
        print(f"{'OK' if rep.passed else 'FAILED'}  suite={rep.suite}")
        return 0 if rep.passed else 1

    raise SystemExit(f"unhandled group {args.group}")


if __name__ == "__main__":
    sys.exit(main())

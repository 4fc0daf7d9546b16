"""Command-line interface.

Subcommands: validate, run, sweep, correct, parametrix-check, oracle-check,
figure1, serve.  Exit codes: 0 ok, 1 invalid config, 2 numerical gate
failure, 3 acceptance check failed.

By default commands execute in-process through the same request models the
HTTP service uses; pass --server URL to act as a thin client of a running
service instead.  --threads pins the BLAS/OpenMP pool (set before numpy is
imported), which is what makes artifact bytes reproducible across machines
with different core counts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_GATE = 2
EXIT_ACCEPT = 3


def _build_parser():
    p = argparse.ArgumentParser(prog="lfplab", description="Lindblad / Fokker-Planck phase-space laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, out=True):
        if config:
            sp.add_argument("--config", required=True, help="path to JSON config")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--server", default=None, help="run against a live service at this URL")
        sp.add_argument("--threads", type=int, default=None, help="pin BLAS/OpenMP thread count")

    sp = sub.add_parser("validate", help="validate a run config")
    common(sp, out=False)

    sp = sub.add_parser("run", help="execute one run configuration")
    common(sp)

    sp = sub.add_parser("sweep", help="h / gamma scaling sweep")
    common(sp)

    sp = sub.add_parser("correct", help="higher-order correction of an existing run")
    sp.add_argument("--run-dir", required=True, help="artifact directory of a finished run")
    sp.add_argument("--order", type=int, default=2)
    sp.add_argument("--server", default=None)
    sp.add_argument("--threads", type=int, default=None)

    sp = sub.add_parser("parametrix-check", help="parametrix measurement report")
    sp.add_argument("--config", default=None, help="optional ParametrixCaseConfig JSON")
    sp.add_argument("--out", required=True)
    sp.add_argument("--server", default=None)
    sp.add_argument("--threads", type=int, default=None)

    sp = sub.add_parser("oracle-check", help="validate the Gaussian oracle against the PDE solver")
    sp.add_argument("--server", default=None)
    sp.add_argument("--threads", type=int, default=None)

    sp = sub.add_parser("figure1", help="open vs closed quartic comparison")
    common(sp)

    sp = sub.add_parser("serve", help="start the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8711)
    sp.add_argument("--workdir", default="./lfplab-jobs")
    sp.add_argument("--workers", type=int, default=1, help="parallel job slots")
    sp.add_argument("--threads", type=int, default=None)
    return p


def _pin_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[var] = str(n)


def _load_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _client_job(server, payload):
    import httpx

    with httpx.Client(base_url=server, timeout=30.0) as client:
        r = client.post("/jobs", json=payload)
        r.raise_for_status()
        job_id = r.json()["job_id"]
        while True:
            st = client.get(f"/jobs/{job_id}").json()
            if st["status"] in ("done", "failed"):
                return st
            time.sleep(0.5)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, 'threads', None):
        _pin_threads(args.threads)

    from .errors import ConfigError, NumericalGateError

    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGateError as exc:
        print(f"numerical gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE


def _dispatch(args) -> int:
    from .errors import ConfigError
    from .experiments.config import (
        ParametrixCaseConfig,
        RunConfig,
        SweepConfig,
        validate_run_config,
    )

    if args.command == "serve":
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(args.workdir, max_workers=args.workers),
                    host=args.host, port=args.port, log_level="info")
        return EXIT_OK

    if args.command == "validate":
        data = _load_json(args.config)
        if args.server:
            import httpx

            r = httpx.post(f"{args.server}/validate", json={"config": data}, timeout=30.0)
            body = r.json()
            print(json.dumps(body, indent=2))
            return EXIT_OK if body.get("valid") else EXIT_CONFIG
        try:
            cfg = RunConfig.model_validate(data)
            warnings = validate_run_config(cfg)
        except (ConfigError, ValueError) as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print("valid")
        for w in warnings:
            print(f"warning: {w}")
        return EXIT_OK

    if args.command == "run":
        data = _load_json(args.config)
        if args.server:
            st = _client_job(args.server, {"kind": "run", "run_config": data})
            print(json.dumps(st, indent=2))
            return EXIT_OK if st["status"] == "done" else EXIT_GATE
        from .experiments import run

        cfg = RunConfig.model_validate(data)
        art = run(cfg, args.out)
        print(f"run complete: {len(art.times)} snapshots, "
              f"final trace_dist = {art.trace_dists[-1]:.6e}")
        print(f"artifacts in {art.out_dir}")
        return EXIT_OK

    if args.command == "sweep":
        data = _load_json(args.config)
        if args.server:
            st = _client_job(args.server, {"kind": "sweep", "sweep_config": data})
            print(json.dumps(st, indent=2))
            return EXIT_OK if st["status"] == "done" else EXIT_GATE
        from .experiments import scaling_sweep

        cfg = SweepConfig.model_validate(data)
        report = scaling_sweep(cfg, args.out)
        print(json.dumps(report, indent=2, sort_keys=True, default=str))
        return EXIT_GATE if report.get("incomplete") else EXIT_OK

    if args.command == "correct":
        if args.server:
            st = _client_job(args.server, {"kind": "correct", "run_dir": args.run_dir,
                                           "correction_order": args.order})
            print(json.dumps(st, indent=2))
            return EXIT_OK if st["status"] == "done" else EXIT_GATE
        from .experiments import higher_order_correction

        result = higher_order_correction(args.run_dir, order=args.order)
        print(json.dumps({k: v for k, v in result.items() if k != "times"},
                         indent=2, sort_keys=True))
        return EXIT_OK

    if args.command == "parametrix-check":
        data = _load_json(args.config) if args.config else {}
        if args.server:
            st = _client_job(args.server, {"kind": "parametrix", "parametrix_config": data})
            print(json.dumps(st, indent=2))
            ok = st["status"] == "done" and st.get("summary", {}).get("ok")
            return EXIT_OK if ok else EXIT_ACCEPT
        from .experiments import parametrix_report

        cfg = ParametrixCaseConfig.model_validate(data)
        report = parametrix_report(cfg, args.out)
        print(json.dumps({k: v for k, v in report.items() if k != "rows"},
                         indent=2, sort_keys=True))
        if not report["ok"]:
            print("parametrix check failed: a Gaussian fit returned c <= 0", file=sys.stderr)
            return EXIT_ACCEPT
        return EXIT_OK

    if args.command == "oracle-check":
        ok, lines = _oracle_check()
        for line in lines:
            print(line)
        return EXIT_OK if ok else EXIT_ACCEPT

    if args.command == "figure1":
        data = _load_json(args.config)
        if args.server:
            st = _client_job(args.server, {"kind": "figure1", "run_config": data})
            print(json.dumps(st, indent=2))
            ok = st["status"] == "done" and st.get("summary", {}).get("ordering_ok")
            return EXIT_OK if ok else EXIT_ACCEPT
        from .experiments import figure1

        cfg = RunConfig.model_validate(data)
        summary = figure1(cfg, args.out)
        print(json.dumps(summary, indent=2, sort_keys=True))
        return EXIT_OK if summary["ordering_ok"] else EXIT_ACCEPT

    raise ConfigError(f"unknown command {args.command!r}")


def _oracle_check() -> tuple[bool, list[str]]:
    """Closed-form oracle vs PDE solver on a small grid; exit 3 on mismatch."""
    import numpy as np

    from .fokker_planck import evolve as fp_evolve
    from .oracle import (
        GaussianMixture,
        coherent_state,
        example_widths,
        mixture_field,
        moment_flow,
    )
    from .phasespace import HamiltonianSpec, JumpSpec, Params, build_grid

    lines = []
    ok = True
    h = 2**-4
    params = Params(h=h, gamma=1.0)
    a1, b1 = example_widths(1 / 16, 1 / 8, 1.0)
    ref_a = (1 / 32) * np.exp(-2.0) + 1 / 32
    ref_b = (3 / 32) * np.exp(2.0) - 1 / 32
    t1 = abs(a1 - ref_a) < 1e-15 and abs(b1 - ref_b) < 1e-15
    ok &= t1
    lines.append(f"[{'PASS' if t1 else 'FAIL'}] example widths closed form")

    grid = build_grid(256, 2.5, h)
    p = HamiltonianSpec([(1, 1, 0.7), (2, 0, 0.3), (0, 2, 0.4)])
    jumps = JumpSpec([(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)])
    g0 = coherent_state((0.4, -0.3), h)
    a0 = mixture_field(GaussianMixture([g0]), grid)
    traj = fp_evolve(a0, p, jumps, params, t_final=1.0, dt=2e-3)
    gt = moment_flow(g0, p, jumps, params, 1.0)
    oracle_field = mixture_field(GaussianMixture([gt]), grid)
    l1 = float(np.abs(oracle_field.values - traj.final().values).sum() * grid.cell_area)
    t2 = l1 <= 1e-4
    ok &= t2
    lines.append(f"[{'PASS' if t2 else 'FAIL'}] oracle-solver equivalence: L1 = {l1:.3e} (<= 1e-4)")

    g_half = moment_flow(g0, p, jumps, params, 0.5)
    g_two = moment_flow(g_half, p, jumps, params, 0.5)
    dc = float(np.max(np.abs(np.array(g_two.cov) - np.array(gt.cov))))
    dm = float(np.max(np.abs(np.array(g_two.center) - np.array(gt.center))))
    t3 = max(dc, dm) < 1e-10
    ok &= t3
    lines.append(f"[{'PASS' if t3 else 'FAIL'}] semigroup property: defect = {max(dc, dm):.2e}")
    return ok, lines


if __name__ == "__main__":
    sys.exit(main())

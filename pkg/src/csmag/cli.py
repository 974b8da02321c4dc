"""Command-line interface.

Subcommands: sweep, trial, rip-check, coherence, quadrature-check,
reconstruct.  Exit codes: 0 success, 1 configuration error, 2 failed
check or assertion.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from . import experiments, l1_recovery, sensing_matrix, signal_models
from .errors import ConfigurationError, InfeasibleError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CHECK = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _parse_m_values(args):
    if args.m_range:
        parts = args.m_range.split(":")
        if len(parts) not in (2, 3):
            raise ConfigurationError("--m-range expects start:stop[:step]")
        start, stop = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 10
        return tuple(range(start, stop + 1, step))
    if args.m:
        return tuple(args.m)
    raise ConfigurationError("provide --m or --m-range")


def _config_from_args(args):
    return experiments.ExperimentConfig(
        scenario=args.scenario,
        grid_order=args.n_order,
        m_values=_parse_m_values(args),
        trials=1000 if args.full else args.trials,
        msqe_threshold=args.threshold,
        master_seed=args.seed,
        noise_sigma=args.noise_sigma,
        n_reps=args.n_reps,
        jobs=args.jobs,
    )


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def _write_sweep(result, records, args):
    stream, close = _open_out(args.out)
    try:
        if args.format == "csv":
            experiments.sweep_to_csv(result, stream)
        else:
            experiments.sweep_to_json(result, stream, records)
    finally:
        if close:
            stream.close()


def _cmd_sweep(args):
    cfg = _config_from_args(args)
    result, records = experiments.run_sweep(cfg, keep_records=True)
    _write_sweep(result, records if args.format == "json" else None, args)
    return EXIT_OK


def _cmd_trial(args):
    cfg = _config_from_args(args)
    m = cfg.m_values[0]
    seed = experiments.trial_seed(cfg.master_seed, cfg.scenario, m, 0)
    record = experiments.run_trial(seed, m, cfg)
    stream, close = _open_out(args.out)
    try:
        json.dump({"format_version": experiments.FORMAT_VERSION,
                   "record": asdict(record)}, stream, indent=1)
        stream.write("\n")
    finally:
        if close:
            stream.close()
    return EXIT_OK


def _cmd_rip_check(args):
    sm = sensing_matrix.load_matrix(args.matrix)
    report = sensing_matrix.restricted_isometry_constant(sm, args.sparsity)
    passed = report.delta < args.delta
    print(f"delta_{args.sparsity} = {report.delta:.6g} "
          f"({report.supports_enumerated} supports); gate delta < {args.delta:g}: "
          f"{'pass' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_CHECK


def _cmd_coherence(args):
    n = 1 << args.n_order
    bases = {
        "spike": lambda: sensing_matrix.spike_basis(n),
        "walsh": lambda: sensing_matrix.walsh_basis(args.n_order),
        "fourier": lambda: sensing_matrix.fourier_real_basis(n),
    }
    try:
        phi = bases[args.phi]()
        psi = bases[args.psi]()
    except KeyError as exc:
        raise ConfigurationError(f"unknown basis {exc}") from exc
    mu = sensing_matrix.coherence(phi, psi)
    print(f"mu({args.phi}, {args.psi}) = {mu:.12g} (n={n})")
    return EXIT_OK


def _cmd_quadrature_check(args):
    if args.field:
        field_model = signal_models.load_field(args.field)
    else:
        n = 1 << args.n_order
        field_model = signal_models.sample_multitone(args.seed, n=n)
    report = experiments.quadrature_gap_check(
        field_model, kind=args.kind, grid_order=args.n_order, m=args.m,
        rng_seed=args.seed,
    )
    print(f"empirical gap {report.empirical_gap:.6g} vs bound {report.gap_bound:.6g}; "
          f"worst entry {report.per_entry_gap:.6g} vs {report.per_entry_bound:.6g} "
          f"(sequence {report.worst_sequence}): {'pass' if report.ok else 'FAIL'}")
    return EXIT_OK if report.ok else EXIT_CHECK


def _cmd_reconstruct(args):
    field_model = signal_models.load_field(args.field)
    sm = sensing_matrix.load_matrix(args.matrix)
    n = sm.n
    order = n.bit_length() - 1
    if 1 << order != n:
        raise ConfigurationError("matrix column count must be a power of two")
    disc = signal_models.discretize(field_model, order)
    if args.sparse_basis == "spike":
        psi = sensing_matrix.spike_basis(n)
    elif args.sparse_basis == "fourier":
        psi = sensing_matrix.fourier_real_basis(n)
    elif args.sparse_basis == "walsh":
        psi = sensing_matrix.walsh_basis(order)
    else:
        raise ConfigurationError(f"unknown sparse basis {args.sparse_basis!r}")
    x_true = psi.columns.T @ disc.values
    y = sm.matrix @ x_true
    rng = np.random.default_rng(args.seed)
    epsilon = args.epsilon
    if args.noise_sigma > 0:
        y = y + args.noise_sigma * rng.standard_normal(sm.m)
        epsilon += args.noise_sigma * np.sqrt(sm.m) * 1.25
    if epsilon > 0:
        res = l1_recovery.bpdn(sm, y, epsilon)
    else:
        res = l1_recovery.basis_pursuit(sm, y)
    b_rec = psi.columns @ res.x
    stream, close = _open_out(args.out)
    try:
        experiments.write_reconstruction(stream, disc.midpoints, b_rec)
    finally:
        if close:
            stream.close()
    err = experiments.msqe(disc.values, b_rec, field_model.T)
    print(f"msqe {err:.6g} (nT)^2 s; solver converged={res.converged} "
          f"iterations={res.iterations}", file=sys.stderr)
    return EXIT_OK


def _add_common_sweep_args(p):
    p.add_argument("--scenario", required=True, choices=experiments.SCENARIOS)
    p.add_argument("--n-order", type=int, default=10, help="grid order N, n = 2^N")
    p.add_argument("--m", type=int, nargs="+", help="measurement counts")
    p.add_argument("--m-range", help="start:stop[:step] measurement grid")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--full", action="store_true", help="use 1000 trials per point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=None,
                   help="success threshold on msqe/T, (nT)^2")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--n-reps", type=int, default=0,
                   help="shot-noise repetitions per measurement (0 = analytic)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = _Parser(prog="csmag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="success-probability sweep over m")
    _add_common_sweep_args(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("trial", help="run a single trial and dump its record")
    _add_common_sweep_args(p)
    p.set_defaults(fn=_cmd_trial)

    p = sub.add_parser("rip-check", help="exact RIC of a matrix file against a gate")
    p.add_argument("--matrix", required=True)
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--delta", type=float, default=sensing_matrix.EXACT_RECOVERY_RIC_GATE)
    p.set_defaults(fn=_cmd_rip_check)

    p = sub.add_parser("coherence", help="coherence between two named bases")
    p.add_argument("--phi", default="walsh")
    p.add_argument("--psi", default="spike")
    p.add_argument("--n-order", type=int, default=10)
    p.set_defaults(fn=_cmd_coherence)

    p = sub.add_parser("quadrature-check", help="midpoint-rule gap against its bound")
    p.add_argument("--field", help="field JSON (default: random multitone)")
    p.add_argument("--kind", choices=("walsh", "random"), default="random")
    p.add_argument("--n-order", type=int, default=10)
    p.add_argument("--m", type=int, default=250)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_quadrature_check)

    p = sub.add_parser("reconstruct", help="reconstruct a serialized field "
                                           "through a serialized matrix")
    p.add_argument("--field", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--sparse-basis", default="spike",
                   choices=("spike", "fourier", "walsh"))
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_reconstruct)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (ConfigurationError, InfeasibleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``coherent-ratchet <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (YAML, see :mod:`.config`);
command-line flags override the file. Tables go to ``--out`` (CSV plus a
``.meta.json`` sidecar) or to stdout.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.

``COHERENT_RATCHET_THREADS`` caps the BLAS/OpenMP thread count.
"""

from __future__ import annotations

import os

_threads = os.environ.get("COHERENT_RATCHET_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import copy  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402

import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .config import TASKS, RunConfig, config_from_dict, load_config  # noqa: E402
from .demo import fmo_demo  # noqa: E402
from .dimer import advantage_rows  # noqa: E402
from .errors import (ConfigError, CoherentRatchetError, InvalidBath, InvalidPartition,  # noqa: E402
                     MissingParameter)
from .heom import build_hierarchy, propagate  # noqa: E402
from .icc import icc_decompose  # noqa: E402
from .io import ResultBundle, emit, new_bundle, render  # noqa: E402
from .model import ComplexPartition, site_projector  # noqa: E402
from .ratchet import (SCAN_COLUMNS, ChainSettings, DimerParams, RateTable, analytic_moments,  # noqa: E402
                      compare_walks, extract_rates, monte_carlo_walk, rate_asymmetry,
                      scan_coherence_vs_drift, trend_report)
from .transfer import coherence_propagation_benchmark  # noqa: E402

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
_CONFIG_ERRORS = (ConfigError, MissingParameter, InvalidPartition, InvalidBath)

logger = logging.getLogger("coherent_ratchet")


# ---------------------------------------------------------------- config assembly

def _csv_list(text, cast=float):
    try:
        return [cast(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}") from exc


def build_config(task: str, args: argparse.Namespace, overrides: dict) -> RunConfig:
    """Merge ``--config`` file, then flag overrides, into a validated config.

    ``overrides`` maps dotted keys (``params.steps``, ``propagation.dt``) to
    flag values; ``None`` values are skipped.
    """
    if getattr(args, "config", None):
        data = load_config(args.config).to_dict()
        if data["task"] != task:
            raise ConfigError(f"config is for task {data['task']!r}, not {task!r}", "task")
    else:
        data = {"task": task}
    data = copy.deepcopy(data)
    for key, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = key.split(".")
        for p in parents:
            if node.get(p) is None:
                node[p] = {}
            node = node[p]
        node[leaf] = value
    if getattr(args, "out", None):
        data["output"] = args.out
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    return config_from_dict(data)


def _finish(bundle: ResultBundle, config: RunConfig) -> None:
    if config.output:
        for path in emit(bundle, config.output):
            logger.info("wrote %s", path)
    else:
        sys.stdout.write(render(bundle))


def _chain(config: RunConfig):
    p = config.params
    settings = ChainSettings(p["chain_t_final"], p["chain_dt"], p["chain_save_every"], p["chain_depth"],
                             p["chain_matsubara"], p["j0"])
    return DimerParams(), config.drude_bath(2), settings


# ---------------------------------------------------------------- subcommands

def run_icc(config: RunConfig) -> ResultBundle:
    h = config.hamiltonian()
    p = config.params
    part = ComplexPartition(tuple(s - 1 for s in p["donor"]), tuple(s - 1 for s in p["acceptor"]))
    icc = icc_decompose(h, part)
    bundle = new_bundle(config)
    bundle.add_table("singular_values", ["index", "coupling_cm-1"],
                     [(l + 1, s) for l, s in enumerate(icc.singular_values)])
    site_cols = [f"site{i + 1}" for i in range(h.n_sites)]
    rows = []
    for l in range(icc.rank_count):
        rows.append((f"donor{l + 1}", icc.singular_values[l], *icc.embed(icc.donor_state(l), "donor", h.n_sites)))
        rows.append((f"acceptor{l + 1}", icc.singular_values[l],
                     *icc.embed(icc.acceptor_state(l), "acceptor", h.n_sites)))
    bundle.add_table("vectors", ["state", "coupling_cm-1", *site_cols], rows)
    return bundle


def run_dimer_scan(config: RunConfig) -> ResultBundle:
    p = config.params
    theta = np.linspace(p["theta_min"], p["theta_max"], p["steps"])
    de = np.linspace(p["de_min"], p["de_max"], p["steps"])
    bundle = new_bundle(config)
    bundle.add_table("advantage", ["theta_rad", "delta_e_cm-1", "p_coherent", "p_thermal", "advantage"],
                     advantage_rows(theta, de, p["temperature"], p["init"]))
    return bundle


def run_propagate(config: RunConfig) -> ResultBundle:
    h = config.hamiltonian()
    prop, p = config.propagation, config.params
    if not 1 <= p["initial_site"] <= h.n_sites:
        raise ConfigError(f"site {p['initial_site']} out of range 1..{h.n_sites}", "params.initial_site")
    pairs = []
    for i, pair in enumerate(p["coherences"]):
        if (not isinstance(pair, list) or len(pair) != 2
                or not all(isinstance(s, int) and 1 <= s <= h.n_sites for s in pair)):
            raise ConfigError("expected a pair of 1-based site numbers", f"params.coherences[{i}]")
        pairs.append((pair[0] - 1, pair[1] - 1))
    hier = build_hierarchy(h, config.drude_bath(h.n_sites), prop.depth, prop.matsubara)
    res = propagate(hier, site_projector(h.n_sites, p["initial_site"] - 1), prop.t_final, prop.dt,
                    save_every=prop.save_every)
    cols = {"t_fs": res.times}
    for i in range(h.n_sites):
        cols[f"p{i + 1}"] = res.populations[:, i]
    for a, b in pairs:
        cols[f"re_rho{a + 1}{b + 1}"] = res.states[:, a, b].real
        cols[f"im_rho{a + 1}{b + 1}"] = res.states[:, a, b].imag
    bundle = new_bundle(config, n_ados=len(hier.indices))
    bundle.add_columns("populations", **cols)
    return bundle


def run_verify(config: RunConfig) -> ResultBundle:
    prop, p = config.propagation, config.params
    bench = coherence_propagation_benchmark(config.drude_bath(4), p["j0"], prop.t_final, prop.dt,
                                            prop.depth, prop.matsubara, prop.save_every, p["t_min"])
    sim, pred = bench.simulated, bench.predicted
    bundle = new_bundle(config)
    bundle.add_columns("rates", t_fs=bench.times, dp_acceptor_dt=bench.rate, p_donor=bench.donor_population)
    bundle.add_columns("acceptor_states", t_fs=bench.times,
                       sim_rho33=sim[:, 0, 0].real, sim_rho44=sim[:, 1, 1].real,
                       sim_re_rho34=sim[:, 0, 1].real, sim_im_rho34=sim[:, 0, 1].imag,
                       pred_rho33=pred[:, 0, 0].real, pred_rho44=pred[:, 1, 1].real,
                       pred_re_rho34=pred[:, 0, 1].real, pred_im_rho34=pred[:, 0, 1].imag)
    bundle.add_table("report", ["quantity", "value"], [
        ("correlation_rate_vs_donor_population", bench.report.correlation),
        ("fitted_scale_fs-1", bench.report.scale),
        ("rms_normalized_element_error", bench.rms_error),
        ("t_min_fs", bench.t_min),
    ])
    return bundle


def run_extract_rates(config: RunConfig) -> ResultBundle:
    params, bath, settings = _chain(config)
    p = config.params
    table = extract_rates(params, bath, p["j"], settings, p["spatial_correlation"])
    table.save(p["rate_file"])
    logger.info("rate table written to %s", p["rate_file"])
    bundle = new_bundle(config, rate_file=p["rate_file"])
    prob = table.p
    bundle.add_table("hop_probabilities", ["coin", "p_plus", "p_minus", "remaining", "tail_rate_plus_fs-1",
                                           "tail_rate_minus_fs-1"],
                     [(c, prob[i, 0], prob[i, 1], table.remaining[i], *table.tail_rates[i])
                      for i, c in enumerate(("+", "-"))])
    return bundle


def _load_rates(config: RunConfig) -> RateTable:
    try:
        return RateTable.load(config.params["rate_file"])
    except OSError as exc:
        raise ConfigError(str(exc), "params.rate_file") from exc


def run_walk(config: RunConfig) -> ResultBundle:
    p = config.params
    rates = _load_rates(config)
    mc = monte_carlo_walk(rates, p["time"], p["traj"], config.seed)
    an = analytic_moments(rates, p["time"])
    cmp = compare_walks(mc, an)
    bundle = new_bundle(config, rate_file=p["rate_file"])
    n, counts = mc.histogram()
    bundle.add_table("position_histogram", ["position_dimers", "count"], zip(n, counts))
    bundle.add_table("summary", ["quantity", "monte_carlo", "analytic"], [
        ("mean_position_dimers", mc.mean_position, an.mean_position),
        ("variance_position_dimers2", mc.variance_position, an.variance_position),
        ("standard_error_dimers", mc.standard_error, float("nan")),
        ("drift_hops_per_ps", mc.drift, an.drift),
        ("drift_nm_per_ps", mc.drift_nm_per_ps, an.drift_nm_per_ps),
        ("diffusion_nm2_per_ps", mc.diffusion, an.diffusion),
        ("skewness", mc.extra.get("skewness", float("nan")), float("nan")),
        ("excess_kurtosis", mc.extra.get("excess_kurtosis", float("nan")), float("nan")),
        ("mean_within_3se", float(cmp["mean_ok"]), float("nan")),
    ])
    return bundle


def run_asymptotics(config: RunConfig) -> ResultBundle:
    p = config.params
    rates = _load_rates(config)
    an = analytic_moments(rates, p["time"])
    asym = rate_asymmetry(rates, an.pi)
    bundle = new_bundle(config, rate_file=p["rate_file"])
    bundle.add_table("summary", ["quantity", "value"], [
        ("pi_plus", an.pi[0]), ("pi_minus", an.pi[1]), ("delta_pi", an.delta_pi),
        ("mean_displacement_per_step", an.extra["n_bar"]), ("mean_step_time_fs", an.extra["t_bar"]),
        ("drift_hops_per_ps", an.drift), ("drift_nm_per_ps", an.drift_nm_per_ps),
        ("diffusion_nm2_per_ps", an.diffusion), ("sigma_1ns_nm", an.sigma_nm(1e6)),
    ])
    bundle.add_columns("asymmetry", t_fs=rates.times, a_t=asym)
    return bundle


def run_scan(config: RunConfig) -> ResultBundle:
    params, bath, settings = _chain(config)
    p = config.params
    rows = scan_coherence_vs_drift(p["param"], p["values"], params, bath, p["j"], settings)
    trend = trend_report(rows)
    bundle = new_bundle(config, scan_parameter=p["param"])
    bundle.add_table("scan", SCAN_COLUMNS, [r.as_tuple() for r in rows])
    bundle.add_table("trend", ["quantity", "value"], sorted(trend.items()))
    return bundle


def run_fmo_demo(config: RunConfig) -> ResultBundle:
    p = config.params
    bundle, _ = fmo_demo(config.drude_bath(7), p["t_final"], p["depth"], p["matsubara"],
                         config.propagation.dt, p["save_every"], config)
    return bundle


RUNNERS = {
    "icc": run_icc, "dimer-scan": run_dimer_scan, "propagate": run_propagate,
    "verify-propagation": run_verify, "ratchet-extract-rates": run_extract_rates,
    "ratchet-walk": run_walk, "ratchet-asymptotics": run_asymptotics, "ratchet-scan": run_scan,
    "fmo-demo": run_fmo_demo,
}


# ---------------------------------------------------------------- argument parsing

def _common(sp: argparse.ArgumentParser, seed: bool = False) -> None:
    sp.add_argument("--config", help="YAML run configuration")
    sp.add_argument("--out", help="main CSV output path (default: stdout)")
    if seed:
        sp.add_argument("--seed", type=int, help="random seed")


def _bath_flags(sp):
    sp.add_argument("--temp", type=float, help="temperature (K)")
    sp.add_argument("--lambda", dest="reorg", type=float, help="reorganization energy (cm^-1)")
    sp.add_argument("--tc", type=float, help="bath correlation time (fs)")


def _chain_flags(sp):
    _bath_flags(sp)
    sp.add_argument("--j", type=float, help="inter-dimer coupling J (cm^-1)")
    sp.add_argument("--j0", type=float, help="small coupling of the HEOM runs (cm^-1)")
    sp.add_argument("--corr", type=float, help="intra-dimer spatial bath correlation")
    sp.add_argument("--chain-tfinal", type=float, help="length of the chain runs (fs)")
    sp.add_argument("--chain-depth", type=int, help="hierarchy depth of the chain runs")
    sp.add_argument("--chain-matsubara", type=int, help="Matsubara terms of the chain runs")


def _propagation_flags(sp):
    sp.add_argument("--tfinal", type=float, help="final time (fs)")
    sp.add_argument("--dt", type=float, help="RK4 step (fs)")
    sp.add_argument("--depth", type=int, help="hierarchy depth L")
    sp.add_argument("--matsubara", type=int, help="Matsubara terms K")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coherent-ratchet",
                                     description="Excitonic coherence transfer and ratchet random walks.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("icc", help="ICC singular values and vectors")
    _common(sp)
    sp.add_argument("--donor", help="comma-separated 1-based donor sites (default 1,2)")
    sp.add_argument("--acceptor", help="comma-separated 1-based acceptor sites (default 3..7)")
    sp.add_argument("--include-site8", action="store_true", help="use the 8-site FMO matrix")
    sp.add_argument("--site8-energy", type=float, help="site-8 energy (cm^-1)")

    sp = sub.add_parser("dimer-scan", help="coherent vs thermal dimer populations on a grid")
    _common(sp)
    sp.add_argument("--theta-min", type=float)
    sp.add_argument("--theta-max", type=float)
    sp.add_argument("--de-min", type=float)
    sp.add_argument("--de-max", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--temp", type=float)
    sp.add_argument("--init", type=int, choices=(1, 2))

    sp = sub.add_parser("propagate", help="HEOM propagation from one site")
    _common(sp)
    _propagation_flags(sp)
    _bath_flags(sp)
    sp.add_argument("--init", type=int, help="1-based initial site")

    sp = sub.add_parser("verify-propagation", help="coupled-dimer coherence propagation benchmark")
    _common(sp)
    _propagation_flags(sp)
    _bath_flags(sp)
    sp.add_argument("--j0", type=float, help="inter-dimer coupling (cm^-1)")

    rp = sub.add_parser("ratchet", help="semi-Markov ratchet walk")
    rsub = rp.add_subparsers(dest="ratchet_command", required=True)
    sp = rsub.add_parser("extract-rates", help="hop statistics from chain HEOM runs")
    _common(sp)
    _chain_flags(sp)
    sp.add_argument("--rate-file", help="rate table to write")
    sp = rsub.add_parser("walk", help="Monte Carlo walk from a rate table")
    _common(sp, seed=True)
    sp.add_argument("--rate-file")
    sp.add_argument("--traj", type=int, help="number of trajectories")
    sp.add_argument("--time", type=float, help="walk duration (fs)")
    sp = rsub.add_parser("asymptotics", help="closed-form drift and diffusion from a rate table")
    _common(sp)
    sp.add_argument("--rate-file")
    sp.add_argument("--time", type=float, help="walk duration (fs)")
    sp = rsub.add_parser("scan", help="coherence time and drift across a parameter scan")
    _common(sp)
    _chain_flags(sp)
    sp.add_argument("--param", choices=("tc", "corr"))
    sp.add_argument("--values", help="comma-separated scan values")

    sp = sub.add_parser("fmo-demo", help="ICC signatures in 7-site FMO dynamics")
    _common(sp)
    sp.add_argument("--tfinal", type=float)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--matsubara", type=int)
    _bath_flags(sp)
    return parser


def _overrides(task: str, a: argparse.Namespace) -> dict:
    g = lambda name: getattr(a, name, None)  # noqa: E731
    o = {"bath.temperature": g("temp") if task != "dimer-scan" else None,
         "bath.reorganization_energy": g("reorg"), "bath.correlation_time": g("tc")}
    if task == "icc":
        o.update({"params.donor": _csv_list(a.donor, int) if a.donor else None,
                  "params.acceptor": _csv_list(a.acceptor, int) if a.acceptor else None,
                  "system.include_site8": True if a.include_site8 else None,
                  "system.site8_energy": a.site8_energy})
    elif task == "dimer-scan":
        o.update({"params.theta_min": a.theta_min, "params.theta_max": a.theta_max,
                  "params.de_min": a.de_min, "params.de_max": a.de_max, "params.steps": a.steps,
                  "params.temperature": a.temp, "params.init": a.init})
    elif task in ("propagate", "verify-propagation"):
        o.update({"propagation.t_final": a.tfinal, "propagation.dt": a.dt, "propagation.depth": a.depth,
                  "propagation.matsubara": a.matsubara})
        o["params.initial_site" if task == "propagate" else "params.j0"] = (
            a.init if task == "propagate" else a.j0)
    elif task in ("ratchet-extract-rates", "ratchet-scan"):
        o.update({"params.j": a.j, "params.j0": a.j0, "params.spatial_correlation": a.corr,
                  "params.chain_t_final": a.chain_tfinal, "params.chain_depth": a.chain_depth,
                  "params.chain_matsubara": a.chain_matsubara})
        if task == "ratchet-scan":
            o.update({"params.param": a.param, "params.values": _csv_list(a.values) if a.values else None})
        else:
            o["params.rate_file"] = a.rate_file
    elif task in ("ratchet-walk", "ratchet-asymptotics"):
        o.update({"params.rate_file": a.rate_file, "params.time": a.time})
        if task == "ratchet-walk":
            o["params.traj"] = a.traj
    elif task == "fmo-demo":
        o.update({"params.t_final": a.tfinal, "params.depth": a.depth, "params.matsubara": a.matsubara})
    return o


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    task = args.command if args.command != "ratchet" else f"ratchet-{args.ratchet_command}"
    assert task in TASKS
    try:
        config = build_config(task, args, _overrides(task, args))
        bundle = RUNNERS[task](config)
        _finish(bundle, config)
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CoherentRatchetError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BrokenPipeError:
        return EXIT_OK
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

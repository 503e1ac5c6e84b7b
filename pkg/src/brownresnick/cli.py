"""Command-line surface: simulate, decluster, fit, predict, diagnose.

Each subcommand reads a flat key = value config file, takes --seed,
--threads and --out-dir flags, writes its outputs plus the resolved
configuration into the output directory, and exits 0 on success, 2 on a
validation problem (bad files, bad config) and 3 on a numerical failure.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import config as cfgmod
from .data import load_dataset
from .declustering import decluster_dataset, load_partitions, save_partitions
from .diagnostics import (
    diagnostics_export,
    empirical_extremal_coefficients,
    posterior_mean_field,
    posterior_mean_variogram,
    save_theta_bins,
)
from .errors import BrownResnickError, ConfigInvalid, ParseError, SchemaError
from .gaussian import StableVariogram
from .mcmc import ChainConfig, PosteriorSamples, PriorSpec, run_chains
from .simulation import (
    BrSimulator,
    GridSpec,
    exceedance_map,
    group_extreme_predictive,
    krige_field,
    mean_map,
    save_grid,
    simulate_simple_br,
    simulate_temperature_field,
)

_VALIDATION_ERRORS = (ConfigInvalid, ParseError, SchemaError, FileNotFoundError,
                      ValueError, KeyError)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _require_dataset(cfg, seed):
    stations = cfgmod.get_str(cfg, "stations", required=True)
    minima = cfgmod.get_str(cfg, "minima", required=True)
    data, report = load_dataset(stations, minima,
                                tie_seed=cfgmod.get_int(cfg, "tie_seed", seed))
    return data, report


def _write_resolved(cfg, args, out_dir, name):
    resolved = dict(cfg)
    resolved["_command"] = name
    resolved["_seed"] = str(args.seed)
    resolved["_threads"] = str(args.threads)
    resolved["_out_dir"] = out_dir
    cfgmod.write_config(resolved, os.path.join(out_dir, f"{name}_config_resolved.txt"))


def _parse_groups(cfg):
    """Config keys group_<name> = 1,5,7 (1-based station positions)."""
    groups = {}
    for key, raw in cfg.items():
        if key.startswith("group_"):
            idx = [int(tok) - 1 for tok in raw.replace(",", " ").split()]
            groups[key[len("group_"):]] = idx
    return groups


def load_samples_csv(path):
    """Read a samples.csv written by the fit command."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if header[:2] != ["chain", "iteration"]:
        raise SchemaError(f"{path}: expected chain,iteration leading columns")
    arr = np.array([[float(v) for v in row] for row in rows])
    if arr.size == 0:
        raise SchemaError(f"{path}: no sample rows")
    chains = arr[:, 0].astype(int)
    return PosteriorSamples(
        columns=tuple(header[2:]), rows=arr[:, 2:], chain_ids=chains,
        iterations=arr[:, 1].astype(int), acceptance={},
        n_chains=int(chains.max()) + 1,
    )


def load_partition_samples_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        current = {}
        key = None
        for row in reader:
            if not row:
                continue
            chain, iteration, winter, text = int(row[0]), int(row[1]), int(row[2]), row[3]
            if key != (chain, iteration):
                if key is not None:
                    rows.append((key[0], key[1], current))
                key = (chain, iteration)
                current = {}
            current[winter] = text
        if key is not None:
            rows.append((key[0], key[1], current))
    return rows


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args, cfg, out_dir):
    kind = cfgmod.get_str(cfg, "kind", "br")
    if kind == "br":
        from .data import load_stations

        stations = load_stations(cfgmod.get_str(cfg, "stations", required=True))
        vario = StableVariogram(cfgmod.get_float(cfg, "lam", required=True),
                                cfgmod.get_float(cfg, "kappa", required=True))
        n_draws = cfgmod.get_int(cfg, "n_draws", 100)
        want_parts = cfgmod.get_bool(cfg, "write_partitions", False)
        result = simulate_simple_br(stations.sites, vario, seed=args.seed,
                                    n_draws=n_draws, return_partitions=want_parts)
        draws, parts = result if want_parts else (result, None)
        path = os.path.join(out_dir, "br_draws.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["draw"] + list(stations.sites.ids))
            for i, row in enumerate(draws):
                writer.writerow([i] + [repr(float(v)) for v in row])
        print(f"wrote {n_draws} exact draws at {stations.sites.n_sites} sites -> {path}")
        if want_parts:
            ppath = os.path.join(out_dir, "br_partitions.csv")
            with open(ppath, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["draw", "partition"])
                for i, pi in enumerate(parts):
                    writer.writerow([i, pi.serialize()])
            print(f"wrote generating partitions -> {ppath}")
        return
    if kind == "field":
        data, _ = _require_dataset(cfg, args.seed)
        posterior = load_samples_csv(cfgmod.get_str(cfg, "samples", required=True))
        field = posterior_mean_field(posterior, data)
        vario = posterior_mean_variogram(posterior)
        grid = GridSpec.from_sites(data.sites, cfgmod.get_float(cfg, "grid_resolution", 25.0))
        years = cfgmod.get_ints(cfg, "years", [2016])
        n_fields = cfgmod.get_int(cfg, "n_fields", 3)
        mu_grid = krige_field(field, data.sites.coords, grid)
        sim = BrSimulator(grid.as_sites(), vario)
        for year in years:
            for i in range(n_fields):
                values = simulate_temperature_field(
                    grid, field, vario, t=year - 2000, seed=[args.seed, year, i],
                    mu_grid=mu_grid, simulator=sim,
                )
                path = os.path.join(out_dir, f"field_{year}_{i}.csv")
                save_grid(path, grid, values)
                print(f"wrote simulated field -> {path}")
        return
    raise ConfigInvalid(f"simulate kind must be 'br' or 'field', got {kind!r}")


def _cmd_decluster(args, cfg, out_dir):
    data, report = _require_dataset(cfg, args.seed)
    lag = cfgmod.get_float(cfg, "lag", 5.0)
    max_distance = cfgmod.get_float(cfg, "max_distance", None)
    partitions = decluster_dataset(data, lag=lag, max_distance=max_distance,
                                   seed=cfgmod.get_int(cfg, "tie_seed", args.seed))
    path = os.path.join(out_dir, "partitions.csv")
    save_partitions(partitions, path)
    sizes = [p.n_blocks for p in partitions.values()]
    print(report.summary())
    print(f"declustered {len(partitions)} winters (lag {lag:g} d"
          + (f", cap {max_distance:g} km" if max_distance else "")
          + f"); partition sizes {min(sizes)}..{max(sizes)} -> {path}")


def _cmd_fit(args, cfg, out_dir):
    data, report = _require_dataset(cfg, args.seed)
    mode = cfgmod.get_str(cfg, "mode", "m3")
    fixed_partitions = None
    if mode == "m2" or cfgmod.get_str(cfg, "partitions", None):
        ppath = cfgmod.get_str(cfg, "partitions", required=(mode == "m2"))
        if ppath:
            fixed_partitions = load_partitions(ppath)
    fixed = tuple(cfgmod.get_str(cfg, "fixed", "").split()) or ()
    chain_config = ChainConfig(
        n_chains=cfgmod.get_int(cfg, "n_chains", 4),
        n_iter=cfgmod.get_int(cfg, "n_iter", 2000),
        burn_in=cfgmod.get_int(cfg, "burn_in", 500),
        mode=mode,
        n_samples=cfgmod.get_int(cfg, "n_samples", 1000),
        sweep_n_samples=cfgmod.get_int(cfg, "sweep_n_samples", None),
        n_shifts=cfgmod.get_int(cfg, "n_shifts", 10),
        mvn_reorder=cfgmod.get_bool(cfg, "mvn_reorder", False),
        thin=cfgmod.get_int(cfg, "thin", 1),
        u_update=_parse_u_update(cfgmod.get_str(cfg, "u_update", "site")),
        partition_sweeps=cfgmod.get_int(cfg, "partition_sweeps", 1),
        store_partitions_every=cfgmod.get_int(cfg, "store_partitions_every", 10),
        fixed=fixed,
    )
    priors = PriorSpec()
    print(report.summary())
    print(f"running {chain_config.n_chains} chains x {chain_config.n_iter} iterations "
          f"({mode}, {args.threads} threads)")
    posterior = run_chains(chain_config, data, priors, master_seed=args.seed,
                           fixed_partitions=fixed_partitions, threads=args.threads)
    samples_path = os.path.join(out_dir, "samples.csv")
    posterior.save_csv(samples_path)
    summary = posterior.summary()
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(summary + "\n")
    if posterior.partition_rows:
        ppath = os.path.join(out_dir, "partition_samples.csv")
        with open(ppath, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["chain", "iteration", "winter", "partition"])
            for chain, iteration, year_map in posterior.partition_rows:
                for year, text in sorted(year_map.items()):
                    writer.writerow([chain, iteration, year, text])
    print(summary)
    print(f"wrote samples -> {samples_path}")


def _parse_u_update(raw):
    if raw in ("site", "joint"):
        return raw
    return int(raw)


def _cmd_predict(args, cfg, out_dir):
    data, _ = _require_dataset(cfg, args.seed)
    posterior = load_samples_csv(cfgmod.get_str(cfg, "samples", required=True))
    field = posterior_mean_field(posterior, data)
    vario = posterior_mean_variogram(posterior)
    years = cfgmod.get_ints(cfg, "years", [2016])
    threshold = cfgmod.get_float(cfg, "threshold", -36.0)
    grid = GridSpec.from_sites(data.sites, cfgmod.get_float(cfg, "grid_resolution", 25.0))
    mu_grid = krige_field(field, data.sites.coords, grid)
    for year in years:
        t = year - 2000
        save_grid(os.path.join(out_dir, f"mean_map_{year}.csv"), grid,
                  mean_map(grid, field, t, mu_grid=mu_grid))
        save_grid(os.path.join(out_dir, f"exceedance_{year}.csv"), grid,
                  exceedance_map(grid, field, t, threshold=threshold, mu_grid=mu_grid))
        print(f"wrote mean and exceedance maps for {year}")
    groups = _parse_groups(cfg)
    n_sims = cfgmod.get_int(cfg, "n_sims", 1000)
    for name, group in groups.items():
        samples = group_extreme_predictive(
            group, field, vario, n_sims=n_sims, seed=args.seed,
            t=years[0] - 2000, stat=cfgmod.get_str(cfg, "group_stat", "max"),
            station_coords=data.sites.coords,
        )
        path = os.path.join(out_dir, f"group_{name}_samples.csv")
        np.savetxt(path, samples, header="group_statistic", comments="")
        print(f"wrote {n_sims} group predictive draws -> {path}")


def _cmd_diagnose(args, cfg, out_dir):
    data, report = _require_dataset(cfg, args.seed)
    print(report.summary())
    edges = cfgmod.get_floats(cfg, "bins", None)
    if edges is None:
        dist = data.sites.distance_matrix()
        top = dist.max()
        edges = list(np.linspace(0, top * 1.01, 8))
    vario = None
    posterior = None
    samples_path = cfgmod.get_str(cfg, "samples", None)
    if samples_path:
        posterior = load_samples_csv(samples_path)
        vario = posterior_mean_variogram(posterior)
    theta_bins = empirical_extremal_coefficients(
        data, edges, n_boot=cfgmod.get_int(cfg, "n_boot", 200), seed=args.seed
    )
    path = os.path.join(out_dir, "theta_bins.csv")
    save_theta_bins(theta_bins, path, vario)
    print(f"wrote empirical extremal coefficients -> {path}")
    if posterior is None:
        return
    ppath = cfgmod.get_str(cfg, "partition_samples", None)
    if ppath:
        posterior.partition_rows.extend(load_partition_samples_csv(ppath))
    declustered = None
    dpath = cfgmod.get_str(cfg, "partitions", None)
    if dpath:
        declustered = load_partitions(dpath)
    written = diagnostics_export(
        data, posterior, out_dir, groups=_parse_groups(cfg),
        declustered=declustered, seed=args.seed,
        n_rep=cfgmod.get_int(cfg, "n_rep", 200),
    )
    for path in written:
        print(f"wrote {path}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "decluster": _cmd_decluster,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "diagnose": _cmd_diagnose,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brownresnick",
        description="Brown-Resnick max-stable inference: simulation, declustering, "
                    "fitting, prediction and diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out-dir", default="out")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
        out_dir = args.out_dir
        os.makedirs(out_dir, exist_ok=True)
        _COMMANDS[args.command](args, cfg, out_dir)
        _write_resolved(cfg, args, out_dir, args.command)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BrownResnickError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

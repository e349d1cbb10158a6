"""Command-line entry point: ``aggtoll {analyze,simulate,field,verify}``.

Exit codes: 0 success, 1 a verification check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import export
from .analysis import (
    classify_rest_point,
    kronecker_spectrum,
    lyapunov_weights,
    projected_symmetric_part,
    projection_basis,
    symmetric_eigenvalues,
    taylor_ess_check,
)
from .dynamics import basin_sweep, integrate, interior_grid, policy_field, vector_field
from .errors import AggTollError, EmptyPathSet, ParseError, UnsupportedDimension, ValidationError
from .game import Game, check_state, grid_states, social_optimum, social_welfare, support_equilibria
from .lyapunov import lyapunov_log_value
from .network import describe_path
from .pricing import Policy, PolicyKind
from .scenario import Scenario, load_scenario
from .verify import nash_set_check, run_checks

log = logging.getLogger("aggtoll")


@dataclass
class RunReport:
    command: str
    scenario: str
    paths: list = field(default_factory=list)
    optima: list = field(default_factory=list)
    target: dict | None = None
    spectra: dict = field(default_factory=dict)
    rest_points: list = field(default_factory=list)
    sweep: dict | None = None
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class Outputs:
    """Collects file contents and writes them only once a command has finished."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.pending: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.pending[name] = text

    def flush(self, report: RunReport) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        report.files = sorted(self.pending) + ["report.json"]
        for name, text in self.pending.items():
            (self.out_dir / name).write_text(text)
        (self.out_dir / "report.json").write_text(report.to_json())


class Context:
    """Game, optima and the resolved policy for a scenario."""

    def __init__(self, scenario: Scenario, optimum_index: int | None = None):
        self.scenario = scenario
        self.game = Game.from_network(scenario.network, scenario.groups)
        scenario.integrator.check_floor(self.game.masses, self.game.K)
        self.solution = social_optimum(self.game, scenario.solver)
        self.optima = self.solution.optima
        spec = scenario.policy
        index = optimum_index if optimum_index is not None else spec.optimum_index
        self.target_index = None
        target = None
        if spec.kind is PolicyKind.AGGREGATE_TOLL:
            if spec.target is not None and optimum_index is None:
                target = scenario.target_array()
            else:
                if index is None:
                    raise ValidationError("aggregate_toll needs a target or an optimum index", "policy")
                if index >= len(self.optima):
                    raise ValidationError(f"optimum index {index} out of range; "
                                          f"{len(self.optima)} optimum/optima found", "policy.optimum_index")
                self.target_index = index
                target = self.optima[index]
            if target.shape != (self.game.R, self.game.K):
                raise ValidationError(f"target must be {self.game.R} x {self.game.K}", "policy.target")
        self.policy = Policy.from_kind(spec.kind, self.game, target)
        self.aggregate_policy = self.policy if spec.kind is PolicyKind.AGGREGATE_TOLL else None

    @property
    def two_by_two(self) -> bool:
        return self.game.R == 2 and self.game.K == 2

    @property
    def identity_overlap(self) -> bool:
        phi = np.asarray(self.game.phi)
        return self.two_by_two and np.array_equal(phi, np.eye(2, dtype=phi.dtype))

    def weights(self):
        if self.aggregate_policy is None or not self.identity_overlap:
            return None
        return lyapunov_weights(np.asarray(self.game.thetas, dtype=float), self.policy)

    def base_report(self, command: str) -> RunReport:
        A = np.asarray(self.game.A, dtype=float)
        report = RunReport(command, self.scenario.name)
        report.paths = [describe_path(self.scenario.network, p) for p in self.game.paths]
        report.optima = [{"index": i, "state": z.tolist(), "sw": float(social_welfare(z, A))}
                         for i, z in enumerate(self.optima)]
        if self.policy.target is not None:
            report.target = {"index": self.target_index, "state": np.asarray(self.policy.target, float).tolist()}
        return report


def cmd_analyze(ctx: Context, outputs: Outputs) -> RunReport:
    game = ctx.game
    report = ctx.base_report("analyze")
    if game.K >= 2:
        basis = projection_basis(game.K, game.R)
        A = np.asarray(game.A, dtype=float)
        report.spectra["welfare_hessian"] = symmetric_eigenvalues(projected_symmetric_part(A, basis)).to_dict()
        report.spectra["welfare_hessian_kronecker"] = kronecker_spectrum(game.thetas, game.phi).to_dict()
        ess = taylor_ess_check(A, basis)
        report.spectra["taylor_ess_untolled"] = ess["is_taylor_ess"]
        if ctx.aggregate_policy is not None:
            ess_tau = taylor_ess_check(ctx.policy.operator, basis)
            report.spectra["toll_hessian"] = ess_tau["spectrum"].to_dict()
            report.spectra["taylor_ess_toll"] = ess_tau["is_taylor_ess"]
            w = ctx.weights()
            if w is not None:
                report.spectra["lyapunov_weights"] = {"q": [float(v) for v in w.q], "delta": float(w.delta)}
    report.rest_points = _pigouvian_rest_points(ctx)
    if ctx.identity_overlap:
        report.checks = [nash_set_check(game)]
    outputs.add("analyze.json", json.dumps({
        "optima": report.optima, "spectra": report.spectra, "rest_points": report.rest_points,
        "nash_sample": report.checks}, indent=2, sort_keys=True, default=_json_default) + "\n")
    return report


def _pigouvian_rest_points(ctx: Context) -> list[dict]:
    game = ctx.game
    pig = Policy.adaptive_pigouvian(game)
    A = np.asarray(game.A, dtype=float)
    points = []
    for z in support_equilibria(pig.operator, game.masses):
        entry = {"state": z.tolist(), "sw": float(social_welfare(z, A)),
                 "optimal": any(np.max(np.abs(z - o)) < 1e-6 for o in ctx.optima)}
        if game.K >= 2:
            cls = classify_rest_point(z, pig)
            entry["class"] = cls["class"]
            entry["real_parts"] = cls["real_parts"]
        points.append(entry)
    return points


def _parse_z0(text: str, game: Game) -> np.ndarray:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"cannot parse {text!r} as comma-separated numbers", "--z0") from None
    if len(values) != game.R * game.K:
        raise ValidationError(f"expected {game.R * game.K} values", "--z0")
    try:
        return check_state(np.array(values).reshape(game.R, game.K), game.masses)
    except ValidationError as exc:
        raise ValidationError(str(exc), "--z0") from None


def cmd_simulate(ctx: Context, outputs: Outputs, z0: str | None = None, grid: int | None = None) -> RunReport:
    game, pol, cfg = ctx.game, ctx.policy, ctx.scenario.integrator
    report = ctx.base_report("simulate")
    weights = ctx.weights()
    if grid is not None:
        if not ctx.two_by_two:
            raise UnsupportedDimension("--grid sweeps need two groups on two paths")
        if grid < 2:
            raise ValidationError("grid size must be at least 2", "--grid")
        starts = interior_grid(game.masses, grid, cfg.epsilon)
        attractors = ([np.asarray(pol.target, float)] if pol.target is not None else list(ctx.optima))
        target = attractors[0]
        res = basin_sweep(starts, pol, target, cfg, weights)
        rows = []
        counts = Counter()
        for s, f in zip(starts, res.finals):
            hit = [i for i, a in enumerate(attractors) if np.max(np.abs(f - a)) < cfg.tol]
            label = hit[0] if hit else -1
            counts[label] += 1
            dist = float(np.max(np.abs(f - attractors[label]))) if hit else \
                float(min(np.max(np.abs(f - a)) for a in attractors))
            rows.append([s[0, 0], s[1, 0], f[0, 0], f[1, 0], bool(hit), label, dist])
        outputs.add("sweep.csv", export.csv_text(
            ["z11_0", "z21_0", "z11_T", "z21_T", "converged", "attractor", "distance"], rows))
        report.sweep = {
            "total": res.total,
            "attractors": [a.tolist() for a in attractors],
            "counts": {str(k): v for k, v in sorted(counts.items())},
            "converged_to_target": res.converged_count,
        }
        if res.monitor.w_min_increment is not None:
            report.sweep["lyapunov_min_increment"] = float(res.monitor.w_min_increment.min())
            report.sweep["lyapunov_fd_error"] = float(res.monitor.w_fd_error.max())
        return report

    start = _parse_z0(z0, game) if z0 else game.uniform_state()
    if weights is not None and np.any(start[np.asarray(pol.target) > 0] <= 0):
        weights = None
    traj = integrate(start, pol, cfg, weights if weights is not None and np.all(start >= cfg.epsilon) else None)
    outputs.add("trajectory.csv", export.trajectory_csv(traj, game.R, game.K))
    report.sweep = None
    final = traj.final
    report.rest_points = [{"final_state": final.tolist(), "sw": float(traj.sw[-1])}]
    if pol.target is not None:
        report.rest_points[0]["distance_to_target"] = float(np.max(np.abs(final - np.asarray(pol.target, float))))
    return report


def cmd_field(ctx: Context, outputs: Outputs, resolution: int = 21, svg: bool = False) -> RunReport:
    game, pol = ctx.game, ctx.policy
    if not ctx.two_by_two:
        raise UnsupportedDimension("phase portraits need two groups on two paths")
    if resolution < 2:
        raise ValidationError("resolution must be at least 2", "--resolution")
    report = ctx.base_report("field")
    m1, m2 = (float(m) for m in game.masses)
    a = np.linspace(0.0, m1, resolution)
    b = np.linspace(0.0, m2, resolution)
    table = vector_field(pol, a, b)
    outputs.add("field.csv", export.field_csv(table))

    states = grid_states(game.masses, resolution)
    sw = social_welfare(states, np.asarray(game.A, dtype=float))
    outputs.add("sw_contour.csv", export.contour_csv(table[:, 0], table[:, 1], sw, "sw"))
    contour = np.column_stack([table[:, 0], table[:, 1], sw])

    weights = ctx.weights()
    if weights is not None:
        target = np.asarray(pol.target, dtype=float)
        support = target > 0
        values = np.full(len(states), np.nan)
        ok = np.all(states[:, support] > 0, axis=1)
        values[ok] = lyapunov_log_value(states[ok], target, weights)
        outputs.add("lyapunov_contour.csv", export.contour_csv(table[:, 0], table[:, 1], values, "lyapunov"))
        contour = np.column_stack([table[:, 0], table[:, 1], values])

    markers = []
    for z in support_equilibria(pol.operator, game.masses):
        if np.max(np.abs(policy_field(z, pol))) > 1e-9:
            continue
        cls = classify_rest_point(z, pol)["class"]
        markers.append((z[0, 0], z[1, 0], cls))
        report.rest_points.append({"state": z.tolist(), "class": cls})
    if svg:
        title = f"{ctx.scenario.name}: {pol.kind.value}"
        outputs.add("phase_portrait.svg", export.phase_portrait_svg(game.masses, table, contour, markers, title))
    return report


def cmd_verify(ctx: Context, outputs: Outputs) -> tuple[RunReport, bool]:
    report = ctx.base_report("verify")
    report.checks = run_checks(ctx.scenario, ctx.game, ctx.optima, ctx.aggregate_policy)
    ok = all(c["passed"] for c in report.checks)
    outputs.add("verify.json", json.dumps({"passed": ok, "checks": report.checks}, indent=2,
                                          sort_keys=True, default=_json_default) + "\n")
    return report, ok


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aggtoll", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("analyze", "optima, spectra, rest points"),
                            ("simulate", "integrate replicator dynamics"),
                            ("field", "vector field and contour grids"),
                            ("verify", "run the property and stability checks")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--optimum-index", type=int, default=None)
        if name == "simulate":
            p.add_argument("--z0", default=None, help="comma-separated state, group-major")
            p.add_argument("--grid", type=int, default=None, help="sweep an N x N interior grid")
        if name == "field":
            p.add_argument("--resolution", type=int, default=21)
            p.add_argument("--svg", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.scenario)
        ctx = Context(scenario, args.optimum_index)
        outputs = Outputs(args.out)
        status = 0
        if args.command == "analyze":
            report = cmd_analyze(ctx, outputs)
        elif args.command == "simulate":
            report = cmd_simulate(ctx, outputs, args.z0, args.grid)
        elif args.command == "field":
            report = cmd_field(ctx, outputs, args.resolution, args.svg)
        else:
            report, ok = cmd_verify(ctx, outputs)
            status = 0 if ok else 1
    except (ParseError, ValidationError, EmptyPathSet, UnsupportedDimension) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except AggTollError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    outputs.flush(report)
    sys.stdout.write(report.to_json())
    return status


if __name__ == "__main__":
    sys.exit(main())

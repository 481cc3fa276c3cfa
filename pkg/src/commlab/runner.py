"""Execute analysis jobs from a spec document and format their reports.

Each job yields a :class:`JobReport`: summary lines for the terminal, a
JSON-ready record and an optional table written as CSV.  Floats in CSV use
17 significant digits so that values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .car import (
    HankelSpec,
    car_generators,
    car_relation_residuals,
    gamma_n_identity_check,
    intertwining_residual,
    weighted_hankel_bound_check,
)
from .linalg import DEFAULT_TOL, ToleranceConfig, operator_norm
from .nearness import (
    build_renorm_model,
    car_nearness_check,
    depth_curve,
    near_gram,
    near_row,
    parallelogram_check,
    renorm_contraction_check,
    renorm_equivalence,
)
from .operators import (
    BetaSequence,
    assemble_R,
    block_projection,
    left_inverse_of_weighted_shift,
    power_profile,
    structural_predicates,
)
from .perturbation import gallery
from .specdoc import Resolver, SpecDocument, _to_complex
from .sylvester import (
    certify_similarity,
    decompose_coisometry_case,
    decompose_isometry_case,
    decompose_weighted_case,
    growth_condition,
    partial_sum_solution,
    solution_from_decomposition,
    solve_sylvester_direct,
)

__all__ = ["JobReport", "run_job", "format_float", "write_report"]


@dataclass
class JobReport:
    name: str
    kind: str
    record: dict
    summary: list[str] = field(default_factory=list)
    header: tuple[str, ...] = ()
    rows: list[tuple] = field(default_factory=list)

    def json_text(self) -> str:
        payload = {"job": self.name, "kind": self.kind, "report": _jsonable(self.record)}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def csv_text(self) -> str | None:
        if not self.header:
            return None
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([format_float(v) for v in row])
        return buf.getvalue()


def format_float(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def write_report(report: JobReport, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out_dir / f"{report.name}.json"
    p.write_text(report.json_text(), encoding="utf-8")
    paths.append(p)
    text = report.csv_text()
    if text is not None:
        p = out_dir / f"{report.name}.csv"
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths


def _short(record: dict, keys) -> str:
    parts = []
    for k in keys:
        parts.append(f"{k}={format_float(record.get(k))}")
    return " ".join(parts)


# --------------------------------------------------------------------------
# jobs
# --------------------------------------------------------------------------

def _beta_for(doc: SpecDocument, res: Resolver, name: str | None, blocks: int) -> BetaSequence:
    """Weights of the named weighted shift; unit weights for plain shifts."""
    if name is not None:
        res(name)
        if name in res.betas:
            return res.betas[name]
    return BetaSequence.constant(1.0, blocks)


def _block_v_name(doc: SpecDocument, block: str) -> str | None:
    return getattr(doc.operators[block], "V", None)


def _diagnose(job, doc, res, cfg):
    A = res.window(job.operator, assemble=True)
    prof = power_profile(A, job.n_max, cfg)
    st = structural_predicates(A, cfg)
    record = {
        "growth": prof.growth, "slope": prof.slope, "rate": prof.rate, "sup": prof.sup,
        "truncated": prof.truncated, "warnings": list(prof.warnings),
        "isometry_on_window": st.isometry_on_window, "coisometry_on_window": st.coisometry_on_window,
        "contraction": st.contraction, "norm": st.norm,
    }
    rows = [(n, v) for n, v in enumerate(prof.norms)]
    return JobReport(job.name, job.kind, record, [_short(record, ("growth", "sup", "norm", "contraction"))],
                     ("n", "norm"), rows)


def _sylvester(job, doc, res, cfg):
    b = res.block(job.block)
    if job.method == "direct":
        sol = solve_sylvester_direct(b.T, b.V, b.X, cfg)
    else:
        sol = partial_sum_solution(b.T, b.V, b.X, job.n_max, mode=job.mode, side=job.side, cfg=cfg)
    record = sol.to_record()
    record["Z_norm"] = operator_norm(sol.Z, cfg) if np.any(sol.Z) else 0.0
    header, rows = (), []
    if sol.partial_norms:
        header, rows = ("n", "partial_norm"), list(enumerate(sol.partial_norms))
    return JobReport(job.name, job.kind, record, [_short(record, ("method", "verdict", "residual"))], header, rows)


def _growth(job, doc, res, cfg):
    b = res.block(job.block)
    rep = growth_condition(b.T, b.V, b.X, job.n_max, side=job.side, cfg=cfg)
    record = rep.to_record()
    return JobReport(job.name, job.kind, record, [_short(record, ("side", "verdict", "sup_value"))],
                     ("n", "partial_norm"), list(enumerate(rep.partial_norms)))


def _decompose(job, doc, res, cfg):
    b = res.block(job.block)
    if job.Z is not None:
        Z = res.window(job.Z).matrix
    else:
        sol = solve_sylvester_direct(b.T, b.V, b.X, cfg)
        if not sol.solvable:
            raise ValueError(f"commutator equation has no solution ({sol.verdict})")
        Z = sol.Z
    L = None
    if job.left_inverse is not None:
        L = res.window(job.left_inverse)
    elif b.V.ambient == "shift":
        V = b.V
        beta = _beta_for(doc, res, _block_v_name(doc, job.block), V.blocks)
        L = left_inverse_of_weighted_shift(beta, V.block_size, V.blocks)
    if job.case == "coisometry":
        dec = decompose_coisometry_case(b.T, b.V, b.X, Z, cfg)
    elif job.case == "isometry":
        dec = decompose_isometry_case(b.T, b.V, b.X, Z, cfg)
    else:
        dec = decompose_weighted_case(b.T, b.V, b.X, Z, L, cfg)
    record = dec.to_record()
    record["case"] = job.case
    if job.case == "coisometry" and L is not None:
        # with T F = 0 and L V = I the solution is rebuilt as Z = D - F L
        rebuilt = solution_from_decomposition(b.T, b.V, dec.A, dec.F, dec.D, L, cfg)
        record["rebuilt_residual"] = rebuilt.residual
    rows = sorted(dec.checks.items())
    return JobReport(job.name, job.kind, record, [_short(record, ("case", "max_residual"))],
                     ("identity", "residual"), rows)


def _certify(job, doc, res, cfg):
    b = res.block(job.block)
    if job.Z is not None:
        Z, method = res.window(job.Z).matrix, "given"
    else:
        sol = solve_sylvester_direct(b.T, b.V, b.X, cfg)
        if not sol.solvable:
            raise ValueError(f"commutator equation has no solution ({sol.verdict}); no certificate")
        Z, method = sol.Z, sol.method
    cert = certify_similarity(b, Z, cfg)
    prof = power_profile(assemble_R(b), job.n_max, cfg)
    record = cert.to_record()
    record.update({"method": method, "power_growth": prof.growth, "power_sup": prof.sup})
    return JobReport(job.name, job.kind, record,
                     [_short(record, ("condition_number", "conjugation_residual", "power_growth"))],
                     ("n", "power_norm"), list(enumerate(prof.norms)))


def _nearness(job, doc, res, cfg):
    T, C = res.window(job.T), res.window(job.C)
    if job.weights is not None:
        beta = BetaSequence(tuple(job.weights))
    elif job.beta_from is not None:
        beta = _beta_for(doc, res, job.beta_from, job.N)
    else:
        beta = None
    P = None
    if job.projection_blocks is not None:
        P = block_projection(T.block_size, T.blocks, job.projection_blocks)
    row = near_row(T, C, beta, job.N, P, cfg)
    gram = near_gram(T, C, beta, job.N, cfg, projection=P)
    record = {"s_row": row.s_row, "s_gram": gram.s_gram, "N": job.N, "projected": P is not None,
              "agree": abs(row.s_row - gram.s_gram) <= 2 * cfg.norm_tol * max(1.0, row.s_row)}
    rows = list(zip(range(job.N + 1), row.per_N_row, gram.per_N_gram))
    return JobReport(job.name, job.kind, record, [_short(record, ("s_row", "s_gram", "projected"))],
                     ("N", "row", "gram"), rows)


def _renorm(job, doc, res, cfg):
    b = res.block(job.block)
    beta = _beta_for(doc, res, _block_v_name(doc, job.block), b.V.blocks)
    model = build_renorm_model(b.T, b.X.copy(), b.V, beta, job.M, cfg)
    eq = renorm_equivalence(model, job.samples, cfg.seed, cfg)
    con = renorm_contraction_check(model, job.samples, cfg.seed, cfg)
    par = parallelogram_check(model, max(1, job.samples // 4), cfg.seed, cfg)
    record = {
        "M": model.M, "nearness_constant": model.nearness_constant,
        "recurrence_residual": model.recurrence_residual,
        "equivalence": eq.to_record(), "contraction": con.to_record(), "parallelogram_residual": par,
    }
    rng = np.random.default_rng(cfg.seed)
    k = rng.standard_normal(model.k_dim)
    h = rng.standard_normal(model.h_dim)
    curve = depth_curve(model, k, h, cfg)
    return JobReport(job.name, job.kind, record,
                     [f"C={format_float(model.nearness_constant)} c_lower={format_float(eq.c_lower)} "
                      f"c_upper={format_float(eq.c_upper)} contraction={format_float(con.passed)} "
                      f"parallelogram={format_float(par)}"],
                     ("m", "gram_inverse_form"), list(enumerate(curve)))


def _car(job, doc, res, cfg):
    spec = HankelSpec(tuple(_to_complex(a) for a in job.alpha), job.blocks, job.modes)
    anti, mixed = car_relation_residuals(car_generators(spec.modes))
    gamma = gamma_n_identity_check(spec, cfg=cfg)
    wh = weighted_hankel_bound_check(spec, cfg)
    near = car_nearness_check(spec, cfg)
    record = {
        "anticommutator_residual": anti, "mixed_residual": mixed,
        "intertwining_residual": intertwining_residual(spec, cfg),
        "gamma_n_max_residual": max(gamma) if gamma else 0.0,
        "weighted_hankel": wh.to_record(),
        "nearness_modulo_first_block": near["nearness"], "nearness_holds": near["holds"],
    }
    n_rows = max(len(gamma), len(near["per_N"]))
    pad = lambda xs, i: xs[i] if i < len(xs) else None
    rows = [(n, pad([None] + gamma, n), pad(near["per_N"], n)) for n in range(n_rows)]
    return JobReport(job.name, job.kind, record,
                     [f"weighted_hankel={format_float(wh.norm)} sqrt_B={format_float(wh.bound)} "
                      f"nearness={format_float(near['nearness'])}"],
                     ("n", "gamma_n_residual", "nearness_per_N"), rows)


def _gallery(job, doc, res, cfg):
    inst = gallery(cfg)[job.instance]
    T = inst.T
    rows = []
    power = np.eye(T.shape[0], dtype=np.complex128)
    for n in range(1, job.n_max + 1):
        power = power @ T
        nrm = operator_norm(power, cfg)
        formula = None
        if inst.power_formula is not None:
            formula = float(np.max(np.abs(power - inst.power_formula(n))))
        rows.append((n, nrm, formula))
    record = {"instance": inst.name, "description": inst.description, "checks": dict(inst.checks),
              "max_norm": max(r[1] for r in rows)}
    return JobReport(job.name, job.kind, record, [_short(record, ("instance", "max_norm"))],
                     ("n", "norm", "formula_residual"), rows)


_DISPATCH = {
    "diagnose": _diagnose,
    "sylvester": _sylvester,
    "growth": _growth,
    "decompose": _decompose,
    "certify": _certify,
    "nearness": _nearness,
    "renorm": _renorm,
    "car": _car,
    "gallery": _gallery,
}


def run_job(doc: SpecDocument, job, cfg: ToleranceConfig = DEFAULT_TOL,
            resolver: Resolver | None = None) -> JobReport:
    res = resolver if resolver is not None else Resolver(doc)
    return _DISPATCH[job.kind](job, doc, res, cfg)

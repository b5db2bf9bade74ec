"""
Core operations behind the command-line subcommands.

Each ``cmd_*`` takes a :class:`config.RunConfig`, writes its result to
``run.out`` (or stdout) and returns the exit code. Library errors propagate
to ``app.main``, which maps them onto exit codes.
"""

import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from config import RunConfig, config
from modules.chain_core import PsiKind, mixing_diagnostics, tv_mixing_time
from modules.constants import estimate_constants, poincare_constant
from modules.coupling import coupling_reports
from modules.decomposition import decompose
from modules.errors import ArtifactError, StructuralError
from modules.file_handler import (FileHandler, chain_to_dict, couplings_to_dict,
                                  decomposition_to_dict, load_chain, load_couplings,
                                  load_graph, load_partition, partition_to_dict)
from modules.glued_graph import (build_glued_graph, canonical_partition, canonical_coupling,
                                 closed_form_quantities, definition_quantities)
from modules.verify import full_report
from utils.formatters import format_csv, format_elapsed, format_float, format_summary, to_json
from utils.validators import ValidationReport, validate_chain, validate_partition

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_IO = 2


def _require(run: RunConfig, name: str) -> Path:
    path = getattr(run, name)
    if path is None:
        raise ArtifactError(f"--{name} is required for '{run.command}'")
    return path


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    success, message = FileHandler.write_file(out, text)
    if not success:
        raise ArtifactError(message)
    logger.info(message)


def _provenance(run: RunConfig) -> Dict[str, Any]:
    return {
        "version": config.app.version,
        "seed": run.seed,
        "restarts": run.restarts,
        "tolerances": run.tolerances.model_dump(),
    }


def cmd_validate(run: RunConfig) -> int:
    """
    Run every applicable validator.

    Returns:
        0 iff the chain, and the partition and couplings when given, are valid
    """
    chain = load_chain(_require(run, "chain"))
    reports: List[ValidationReport] = [validate_chain(chain, run.tolerances)]
    notes: List[str] = []
    partition = None
    if run.partition is not None:
        partition = load_partition(run.partition, chain)
        reports.append(validate_partition(partition, chain.n, run.tolerances))
    if run.couplings is not None:
        couplings = load_couplings(run.couplings, chain)
        if partition is None:
            notes.append("couplings need a partition; skipped")
        elif not reports[-1].ok:
            notes.append("partition is invalid; couplings not checked")
        else:
            system = decompose(chain, partition, run.tolerances)
            for kappa in couplings:
                try:
                    reports.extend(coupling_reports(system, chain.n, [kappa], run.tolerances))
                except StructuralError as e:
                    report = ValidationReport(f"coupling({kappa.i},{kappa.j})")
                    report.add("support", (kappa.i, kappa.j), 0.0, str(e))
                    reports.append(report)
    ok = all(r.ok for r in reports)
    document = {"ok": ok, "reports": [r.to_dict() for r in reports], "notes": notes}
    _emit(to_json(document), run.out)
    for report in reports:
        for violation in report.violations:
            logger.warning("%s: %s", report.subject, violation.message)
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_decompose(run: RunConfig) -> int:
    """Write pi_hat, Q_hat and every (pi_i, Q_i) as JSON."""
    chain = load_chain(_require(run, "chain"))
    partition = load_partition(_require(run, "partition"), chain)
    system = decompose(chain, partition, run.tolerances)
    _emit(to_json(decomposition_to_dict(system)), run.out)
    logger.info(format_summary("decomposed", {"states": chain.n, "classes": partition.k}))
    return EXIT_OK


def cmd_constants(run: RunConfig) -> int:
    """Exact lambda and MLSI/LSI estimates; a reducible chain still exits 0."""
    chain = load_chain(_require(run, "chain"))
    started = time.perf_counter()
    report = estimate_constants(chain, restarts=run.restarts, seed=run.seed,
                                max_iter=run.max_iter, threads=run.threads,
                                tolerances=run.tolerances)
    logger.info("constants estimated in %s", format_elapsed(time.perf_counter() - started))
    document = report.to_dict()
    document["provenance"] = _provenance(run)
    _emit(to_json(document), run.out)
    return EXIT_OK


def cmd_bound(run: RunConfig) -> int:
    """
    Full verification report.

    Returns:
        0 iff the POINCARE verdict passes
    """
    chain = load_chain(_require(run, "chain"))
    partition = load_partition(_require(run, "partition"), chain)
    couplings = None
    if not run.product_couplings and run.couplings is not None:
        couplings = load_couplings(run.couplings, chain)
    started = time.perf_counter()
    report = full_report(chain, partition, couplings, product_couplings=run.product_couplings,
                         complete_transpose=run.complete_transpose, seed=run.seed,
                         restarts=run.restarts, max_iter=run.max_iter, threads=run.threads,
                         tolerances=run.tolerances)
    logger.info("verification finished in %s", format_elapsed(time.perf_counter() - started))
    _emit(to_json(report), run.out)
    poincare = next(v for v in report["verdicts"] if v["kind"] == PsiKind.POINCARE.value)
    return EXIT_OK if poincare["pass"] else EXIT_FAILURE


def cmd_glued(run: RunConfig) -> int:
    """
    Build the glued-graph instance and write chain, partition, couplings and quantities.

    With ``--out`` the four artifacts are written into that directory,
    otherwise one combined document goes to stdout.
    """
    base = load_graph(_require(run, "graph"))
    glued, chain = build_glued_graph(base)
    partition = canonical_partition(glued)
    couplings = canonical_coupling(glued, chain, run.tolerances)
    closed = closed_form_quantities(base).to_dict()
    definition = definition_quantities(base, run.tolerances)
    quantities = {
        "closed_form": closed,
        "definition": definition,
        "difference": {k: abs(closed[k] - definition[k]) for k in closed},
        "vertices": len(glued.order),
    }
    artifacts = {
        "chain": chain_to_dict(chain),
        "partition": partition_to_dict(partition),
        "couplings": couplings_to_dict(chain, list(couplings.couplings.values())),
        "quantities": quantities,
    }
    logger.info(format_summary("glued graph", {"vertices": len(glued.order),
                                               "chi": couplings.chi}))
    if run.out is None:
        _emit(to_json(artifacts), None)
        return EXIT_OK
    success, message = FileHandler.ensure_directory(run.out)
    if not success:
        raise ArtifactError(message)
    for name, document in artifacts.items():
        success, message = FileHandler.write_json(run.out / f"{name}.json", document)
        if not success:
            raise ArtifactError(message)
    return EXIT_OK


def cmd_mixing(run: RunConfig) -> int:
    """
    TV mixing curve as CSV.

    Footer lines give lambda, the order-of-magnitude diagnostics and, last,
    the grid bracket of the mixing time. With ``with_estimates`` the MLSI
    and LSI ratios use the estimated alpha and rho.
    """
    chain = load_chain(_require(run, "chain"))
    result = tv_mixing_time(chain, run.eps, run.t_max, run.step)
    lam = poincare_constant(chain, run.tolerances)
    alpha = rho = None
    if run.with_estimates:
        report = estimate_constants(chain, restarts=run.restarts, seed=run.seed,
                                    max_iter=run.max_iter, threads=run.threads,
                                    tolerances=run.tolerances)
        alpha, rho = report.alpha_est.value, report.rho_est.value
    diagnostics = mixing_diagnostics(chain, result, lam, alpha, rho)
    footer = [f"lambda,{format_float(lam)}"]
    for key in ("poincare_ratio", "mlsi_ratio", "lsi_ratio"):
        if key in diagnostics:
            footer.append(f"{key},{format_float(diagnostics[key])}")
    footer.append(f"t_bracket,{format_float(result.t_bracket)}" if result.reached
                  else "t_bracket,not reached")
    rows = np.column_stack([result.times, result.distances])
    _emit(format_csv(["t", "max_tv"], rows, footer), run.out)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "decompose": cmd_decompose,
    "constants": cmd_constants,
    "bound": cmd_bound,
    "glued": cmd_glued,
    "mixing": cmd_mixing,
}

"""
Output formatters for the CLI
"""

import json
from typing import Any, Dict, List, Optional

from .models import ConvergenceTable
from .timeint import EnergyTrace


def _error(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2E}"


def _order(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def format_table(table: ConvergenceTable, format: str = "table") -> str:
    """Format a convergence table: N, then each norm with its order"""

    if format == "json":
        return json.dumps(table.to_dict(), indent=2)

    columns = table.columns
    if format == "simple":
        lines = []
        for row in table.rows:
            cells = [f"{key}={_error(row.errors.get(key))} ({_order(row.orders.get(key))})"
                     for key in columns]
            lines.append(f"N={row.n} " + " ".join(cells))
        return "\n".join(lines)

    # table format
    header = f"{'N':>6}"
    for key in columns:
        header += f" {key + ' error':>12} {'order':>6}"
    lines = [f"{table.problem}, P{table.k}", header, "-" * len(header)]
    for row in table.rows:
        line = f"{row.n:>6}"
        for key in columns:
            line += f" {_error(row.errors.get(key)):>12} {_order(row.orders.get(key)):>6}"
        lines.append(line)
    return "\n".join(lines)


def format_trace(trace: EnergyTrace, format: str = "table", every: int = 1) -> str:
    """Format an energy trace"""

    if format == "json":
        return json.dumps({"rows": trace.rows(), "monotone": trace.is_monotone()}, indent=2)

    verdict = "non-increasing" if trace.is_monotone() else "NOT monotone"
    summary = (f"E(0) = {trace.energies[0]:.6e}, E(T) = {trace.energies[-1]:.6e}, "
               f"relative change {trace.relative_drift():.3e}, {verdict}")
    if format == "simple":
        return summary

    lines = [f"{'step':>6} {'t':>10} {'energy':>16} {'increment':>12}", "-" * 47]
    rows = trace.rows()
    for row in rows[::max(1, every)]:
        lines.append(f"{row['step']:>6} {row['t']:>10.4f} {row['energy']:>16.9e} "
                     f"{row['dissipation_increment']:>12.3e}")
    lines.append("")
    lines.append(summary)
    return "\n".join(lines)


def format_report(report: Dict[str, Any], format: str = "table", verbose: bool = False) -> str:
    """Format a property-suite report (the dict from SuiteReport.to_dict)"""

    if format == "json":
        return json.dumps(report, indent=2)

    status = "PASS" if report["passed"] else "FAIL"
    headline = f"{report['suite']}: {status} ({report['n_checks'] - report['n_failed']}/{report['n_checks']} checks)"
    if format == "simple":
        return headline

    lines = [headline]
    for check in report["checks"]:
        if check["passed"] and not verbose:
            continue
        mark = "✅" if check["passed"] else "❌"
        value = "" if check["value"] is None else f" value={check['value']:.3e}"
        tolerance = "" if check["tolerance"] is None else f" tol={check['tolerance']:.1e}"
        lines.append(f"  {mark} {check['name']}{value}{tolerance}")
        if check["detail"] and (verbose or not check["passed"]):
            lines.append(f"       {check['detail']}")
    return "\n".join(lines)


def format_problem_list(problems: List[Dict[str, Any]], format: str = "table") -> str:
    """Format the problem registry"""

    if format == "json":
        return json.dumps(problems, indent=2)

    if format == "simple":
        return "\n".join(p["id"] for p in problems)

    lines = [f"{'ID':<8} {'ORDER':<6} {'DIM':<4} {'T':<6} DESCRIPTION", "-" * 60]
    for p in problems:
        lines.append(f"{p['id']:<8} {p['order']:<6} {p['dimension']:<4} {p['t_final']:<6g} {p['description']}")
    lines.append("")
    lines.append("Also: order:<n>[:odd-plus] for u_t + sigma d^n u = 0, and custom (--order, --exact)")
    return "\n".join(lines)


def format_run(summary: Dict[str, Any]) -> str:
    """Format the outcome of a single solve"""

    lines = [f"N = {summary['n']}, {summary['n_steps']} steps of dt = {summary['dt']:.3e}"]
    for key, value in summary["errors"].items():
        lines.append(f"  {key:<6} error: {value:.6e}")
    if summary.get("energy_monotone") is not None:
        lines.append(f"  energy non-increasing: {summary['energy_monotone']}")
    lines.append(f"  wall time: {summary['wall_time']:.2f}s")
    return "\n".join(lines)

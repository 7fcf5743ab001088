"""
Human-readable views of results
Every function returns the text to print; JSON output bypasses this module.
"""

import math

from config.settings import APP_NAME, VERSION
from services.expressions import render

STATUS_ICONS = {
    "CERTIFIED": "✅",
    "HEURISTIC_ONLY": "⚠️",
}


def banner(title, icon="🎯"):
    line = "=" * 60
    return f"{line}\n{icon} {title}\n{line}"


def _number(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return "unavailable"
    return f"{value:.9g}"


def format_certificate(cert):
    """Bracket, witness and bookkeeping of a BoundCertificate"""
    icon = STATUS_ICONS.get(cert.status, "○")
    lines = [
        f"{icon} Status: {cert.status}",
        f"  Upper (certified): {_number(cert.upper)}",
        f"  Lower (incumbent): {_number(cert.lower)}",
        f"  Gap:               {_number(cert.gap)}  (tolerance {cert.tolerance_used:g})",
        f"  Boxes explored:    {cert.boxes_explored}",
        f"  Search iterations: {cert.iterations}",
    ]
    if cert.witness.points:
        lines.append("  Witness distribution:")
        for x, w in cert.witness.points:
            coords = ", ".join(f"{v:.6g}" for v in x)
            lines.append(f"    • ({coords})  weight {w:.6g}")
    for note in cert.notes:
        lines.append(f"  📝 {note}")
    return "\n".join(lines)


def format_inequality(family, result):
    lines = [
        f"📐 {family}",
        f"  Bound:         {_number(result.bound)}",
        f"  Clipped bound: {_number(result.clipped_bound)}",
        f"  Rate:          {_number(result.rate)}",
    ]
    if result.zeta is not None:
        lines.append(f"  Optimizer:     {_number(result.zeta)}")
    for key, value in sorted(result.details.items()):
        lines.append(f"  {key}: {value}")
    return "\n".join(lines)


def format_variance_range(result):
    if result.zero_probability:
        return "📐 variance-range\n  eps exceeds r: probability is exactly 0"
    lines = ["📐 variance-range"]
    for name, value in zip(("tier1", "tier2", "tier2_relaxed", "tier3"), result.tiers):
        lines.append(f"  {name:<14} {_number(value)}")
    lines.append(f"  Clipped bound: {_number(result.clipped_bound)}")
    if result.zeta is not None:
        lines.append(f"  Optimizer:     {_number(result.zeta)}")
    return "\n".join(lines)


def format_envelope(norm_bound, second_moment_bound):
    return (
        "📏 Moment envelope\n"
        f"  ||X - mu|| <= {_number(norm_bound)}\n"
        f"  E||X - mu||^2 <= {_number(second_moment_bound)}"
    )


def format_asymptotics(reports):
    lines = ["📈 Asymptotic structure", "  eps          rate           gaussian       corrected      phi(zeta)/zeta"]
    for r in reports:
        lines.append(
            f"  {r.epsilon:<12.6g} {r.rate:<14.8g} {r.gaussian_rate:<14.8g} "
            f"{r.corrected_rate:<14.8g} {r.ratio_phi_zeta:.8g}"
        )
    return "\n".join(lines)


def format_stability(cert, summary):
    lines = [banner("ROBUST STABILITY OF THE UNCERTAIN PLANT", "🛰️"), format_certificate(cert), ""]
    marker = "✅" if summary["in_window"] else "❌"
    low, high = summary["window"]
    lines.append(f"{marker} Reference bound {summary['reference']:g}, window [{low:g}, {high:g}], "
                 f"certified {_number(summary['certified_upper'])}")
    if "discrepancy" in summary:
        lines.append(f"  📝 {summary['discrepancy']}")
    return "\n".join(lines)


def format_suite(report):
    marker = "✅" if not report["violations"] else "❌"
    lines = [f"{marker} Suite {report['suite']}: {report['cells']} cells, {len(report['violations'])} violations"]
    for violation in report["violations"][:10]:
        lines.append(f"  • {violation}")
    if len(report["violations"]) > 10:
        lines.append(f"  ... and {len(report['violations']) - 10} more")
    return "\n".join(lines)


def format_parse(expr, variables):
    names = ", ".join(f"x{i + 1}" for i in sorted(variables)) or "none"
    return f"✅ {render(expr)}\n  Variables: {names}"


def version_line():
    return f"{APP_NAME} v{VERSION}"

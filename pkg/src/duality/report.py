"""Plain-language reading of the multipliers."""

import logging
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from src.solver.plan import DualCertificate

logger = logging.getLogger(__name__)

ZERO = 1e-9


class MarginalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    lam: List[float]
    idle_drivers: List[bool]  # per step: lam == 0
    node_ranking: List[Tuple[str, float]]  # step-1 node values, highest first
    uniform: bool
    text: str


def marginal_report(cert: DualCertificate, real_nodes: Optional[List[str]] = None, drivers: float = 1.0) -> MarginalReport:
    """
    lam is the value of one more unit of driver mass (per step); mu ranks
    regions by how much an extra driver placed there is worth relative to the
    reference region. `drivers` converts normalized values to money per driver.
    """
    nodes = real_nodes or list(cert.mu[0])
    values = {v: cert.mu[0][v] + (cert.capacity[0][v] if cert.mode == "dynamic" else 0.0) for v in nodes}
    ranking = sorted(values.items(), key=lambda kv: (-kv[1], kv[0]))
    spread = ranking[0][1] - ranking[-1][1] if ranking else 0.0
    uniform = spread <= 1e-6
    idle = [lam <= ZERO for lam in cert.lam]

    lines = []
    if cert.mode == "static":
        lam = cert.lam[0]
        if idle[0]:
            lines.append("lambda = 0: there are idle drivers; adding more drivers cannot increase the objective.")
        else:
            lines.append(
                f"lambda = {lam:.6g}: all drivers are busy; one more unit of driver mass adds {lam:.6g} per step "
                f"({lam / drivers:.6g} per driver)."
            )
    else:
        busy = sum(1 for x in idle if not x)
        lines.append(f"{busy} of {len(idle)} steps have every driver busy (lambda > 0).")
        peak = max(range(len(cert.lam)), key=cert.lam.__getitem__)
        lines.append(f"Peak marginal value {cert.lam[peak]:.6g} at step {peak + 1}.")
        for t, lam in enumerate(cert.lam, start=1):
            lines.append(f"  step {t}: lambda = {lam:.6g}" + (" (idle drivers)" if idle[t - 1] else ""))

    if uniform:
        lines.append("All regions are equally supply-starved (uniform mu).")
    else:
        lines.append("Regions by marginal driver value (mu, relative to the reference region):")
        lines.extend(f"  {v}: {m:.6g}" for v, m in ranking)

    return MarginalReport(
        lam=list(cert.lam),
        idle_drivers=idle,
        node_ranking=ranking,
        uniform=uniform,
        text="\n".join(lines),
    )

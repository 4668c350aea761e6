"""Per-cluster feature-importance reports.

For a scalar-output network the affine map of a cluster has a single weight
row, and each entry multiplies exactly one input feature. Reading those
entries against the feature names yields a local, exact explanation of what
the network computes on that cluster. Weights are reported raw by default;
max_abs rescaling (largest magnitude becomes 1) is available for comparing
shapes across clusters.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ShapeError
from .partition import Cluster

__all__ = ["NORMALIZATIONS", "ImportanceReport", "feature_importance", "render_report"]

NORMALIZATIONS = ("raw", "max_abs")
RENDER_FORMATS = ("json", "csv", "text-table")


@dataclass(frozen=True)
class ImportanceReport:
    """Named feature weights of one cluster's affine map."""

    cluster_id: int
    feature_importances: tuple[tuple[str, float], ...]
    bias: float
    normalization: str

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.feature_importances])

    def weight_of(self, feature_name: str) -> float:
        for name, w in self.feature_importances:
            if name == feature_name:
                return w
        raise InputError(f"unknown feature name: {feature_name}")


def feature_importance(
    cluster: Cluster,
    feature_names,
    normalization: str = "raw",
    cluster_id: int = 0,
) -> ImportanceReport:
    """Attach feature names to a cluster's weight row.

    max_abs divides by the largest |weight| so the dominant feature gets
    magnitude 1; an all-zero row is left untouched. Rescaling by a positive
    constant preserves signs, zeros and the magnitude ranking.
    """
    omega = cluster.affine.omega
    if omega.shape[0] != 1:
        raise ShapeError(
            f"importance reports require a scalar output, got {omega.shape[0]} rows"
        )
    names = tuple(str(n) for n in feature_names)
    if len(names) != omega.shape[1]:
        raise ShapeError(
            f"{len(names)} feature names for {omega.shape[1]} weights"
        )
    if normalization not in NORMALIZATIONS:
        raise InputError(
            f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}"
        )
    row = omega[0]
    if normalization == "max_abs":
        peak = np.abs(row).max()
        if peak > 0.0:
            row = row / peak
    return ImportanceReport(
        cluster_id=cluster_id,
        feature_importances=tuple(zip(names, (float(w) for w in row))),
        bias=float(cluster.affine.bias[0]),
        normalization=normalization,
    )


def render_report(clusters, reports, format: str = "csv") -> str:
    """Serialize aligned clusters and reports into one document.

    Output is a deterministic function of the inputs. The csv layout is one
    row per (cluster, feature) pair with columns cluster_id, feature, weight,
    bias, size, fraction.
    """
    clusters = list(clusters)
    reports = list(reports)
    if len(clusters) != len(reports):
        raise InputError(
            f"{len(clusters)} clusters but {len(reports)} reports"
        )
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cluster_id", "feature", "weight", "bias", "size", "fraction"])
        for cluster, report in zip(clusters, reports):
            for name, weight in report.feature_importances:
                writer.writerow(
                    [
                        report.cluster_id,
                        name,
                        repr(weight),
                        repr(report.bias),
                        cluster.stats.size,
                        repr(cluster.stats.fraction),
                    ]
                )
        return buf.getvalue()
    if format == "json":
        doc = [
            {
                "cluster_id": report.cluster_id,
                "pattern": cluster.pattern.bitstring,
                "normalization": report.normalization,
                "bias": report.bias,
                "size": cluster.stats.size,
                "fraction": cluster.stats.fraction,
                "importances": [
                    {"feature": name, "weight": weight}
                    for name, weight in report.feature_importances
                ],
            }
            for cluster, report in zip(clusters, reports)
        ]
        return json.dumps(doc, indent=2) + "\n"
    if format == "text-table":
        lines = []
        for cluster, report in zip(clusters, reports):
            lines.append(
                f"cluster {report.cluster_id}  pattern={cluster.pattern.bitstring or '-'}  "
                f"size={cluster.stats.size}  fraction={cluster.stats.fraction:.4f}  "
                f"bias={report.bias:+.6f}"
            )
            width = max((len(n) for n, _ in report.feature_importances), default=0)
            for name, weight in report.feature_importances:
                lines.append(f"  {name:<{width}}  {weight:+.6f}")
        if not lines:
            lines.append("(no clusters)")
        return "\n".join(lines) + "\n"
    raise InputError(f"format must be one of {RENDER_FORMATS}, got {format!r}")

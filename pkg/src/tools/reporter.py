"""
Report files.

<output_dir>/ledger.jsonl             normalised ledger
<output_dir>/Q<q>/<kind>.json|.csv    one pair per report kind
<output_dir>/Q<q>/amendments.json     amendments made when closing Q<q>
"""
import json
import logging
import os
from typing import Dict, List, Optional

import pandas as pd

from ..errors import DonationProtocolError, QuarterError
from ..schemas import AmendmentDiff, NullMarker, ReportSet

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["quarter", "unit", "donor", "amount_pence", "category", "receiving_unit"]

# kind -> (sections, null marker listed with it)
REPORT_KINDS: Dict[str, tuple] = {
    "quarterly": (("quarterly_report",), NullMarker.QUARTERLY),
    "s62": (("s62_ec_report",), None),
    "s62-audit": (("s62_audit_report",), NullMarker.SECTION_62),
    "cf": (("carried_forward_report", "carried_forward_annex"), NullMarker.CARRIED_FORWARD),
}


def report_payload(rs: ReportSet, kind: str) -> dict:
    sections, marker = REPORT_KINDS[kind]
    data = rs.model_dump(mode="json")
    payload = {"quarter": rs.quarter, "kind": kind}
    payload.update({s: data[s] for s in sections})
    if marker is not None:
        payload["null_entries"] = [e for e in data["null_entries"] if e["marker"] == marker.value]
    return payload


def report_frame(rs: ReportSet, kind: str, virtual_unit: str = "VIRTUAL") -> pd.DataFrame:
    """
    Flat rows for one report kind, one row per donation or null entry. `unit`
    is the canonical unit; `receiving_unit` keeps the Head Office sub-unit.
    """
    rows: List[dict] = []

    def add(unit: str, donor: str, amount: Optional[int], category: str,
            receiving_unit: Optional[str] = None):
        rows.append({"quarter": rs.quarter, "unit": unit, "donor": donor,
                     "amount_pence": amount, "category": category,
                     "receiving_unit": receiving_unit})

    if kind == "quarterly":
        for e in rs.quarterly_report:
            for d in e.donations:
                add(e.unit, e.donor, d.amount, "R", d.receiving_unit)
    elif kind == "s62":
        for e in rs.s62_ec_report:
            add(virtual_unit, e.donor, e.aggregate, "S62")
    elif kind == "s62-audit":
        for e in rs.s62_audit_report:
            for d in e.donations:
                add(d.unit, e.donor, d.amount, "S62", d.receiving_unit)
    elif kind == "cf":
        for e in rs.carried_forward_report:
            for d in e.donations:
                add(e.unit, e.donor, d.amount, "CF", d.receiving_unit)
        for e in rs.carried_forward_annex:
            for d in e.donations:
                add(e.unit, e.donor, d.amount, "CF-annex", d.receiving_unit)
    else:
        raise DonationProtocolError(f"unknown report kind '{kind}' (expected one of {list(REPORT_KINDS)})")

    marker = REPORT_KINDS[kind][1]
    for n in rs.null_entries:
        if n.marker == marker:
            add(n.unit, n.donor, None, f"NULL-{n.marker.value}")

    frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
    frame["amount_pence"] = frame["amount_pence"].astype("Int64")
    return frame


class ReportGenerator:
    def __init__(self, output_dir="reports", virtual_unit: str = "VIRTUAL"):
        self.output_dir = output_dir
        self.virtual_unit = virtual_unit
        os.makedirs(output_dir, exist_ok=True)

    def quarter_dir(self, q: int) -> str:
        return os.path.join(self.output_dir, f"Q{q}")

    def generate_report(self, rs: ReportSet) -> List[str]:
        """Writes the JSON and CSV files of every report kind for one quarter."""
        qdir = self.quarter_dir(rs.quarter)
        os.makedirs(qdir, exist_ok=True)
        written = []
        for kind in REPORT_KINDS:
            json_path = os.path.join(qdir, f"{kind}.json")
            with open(json_path, "w", encoding="utf-8") as f:
                json.dump(report_payload(rs, kind), f, indent=2, ensure_ascii=False)
            csv_path = os.path.join(qdir, f"{kind}.csv")
            report_frame(rs, kind, self.virtual_unit).to_csv(csv_path, index=False)
            written += [json_path, csv_path]
        logger.debug("[REPORT] Wrote Q%d reports to %s", rs.quarter, qdir)
        return written

    def write_amendments(self, diff: AmendmentDiff) -> Optional[str]:
        if diff.is_empty:
            return None
        qdir = self.quarter_dir(diff.closing_quarter)
        os.makedirs(qdir, exist_ok=True)
        path = os.path.join(qdir, "amendments.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write(diff.model_dump_json(indent=2))
        logger.info("[REPORT] Q%d amendments: %s", diff.closing_quarter, diff.sections_touched())
        return path

    def read_report_set(self, q: int) -> ReportSet:
        """Re-parses the per-kind JSON files of a closed quarter."""
        merged: dict = {"quarter": q, "null_entries": []}
        for kind in REPORT_KINDS:
            path = os.path.join(self.quarter_dir(q), f"{kind}.json")
            try:
                with open(path, encoding="utf-8") as f:
                    payload = json.load(f)
            except FileNotFoundError as e:
                raise QuarterError(f"Q{q} has not been closed: {path} missing") from e
            merged["null_entries"] += payload.pop("null_entries", [])
            payload.pop("kind", None)
            merged.update(payload)
        return ReportSet.model_validate(merged)

    def closed_quarters(self) -> Dict[int, ReportSet]:
        closed = {}
        for q in range(1, 5):
            if os.path.exists(os.path.join(self.quarter_dir(q), "quarterly.json")):
                closed[q] = self.read_report_set(q)
        return closed

    def read_frame(self, q: int, kind: str) -> pd.DataFrame:
        path = os.path.join(self.quarter_dir(q), f"{kind}.csv")
        if not os.path.exists(path):
            raise QuarterError(f"Q{q} has no {kind} report at {path}")
        return pd.read_csv(path, dtype={"amount_pence": "Int64", "unit": str, "donor": str, "receiving_unit": str})

    def ledger_path(self) -> str:
        return os.path.join(self.output_dir, "ledger.jsonl")

from typing import Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from .engine.amendments import diff_reports, require_closed
from .engine.classifier import YearClassification, classify_year
from .ledger import Ledger
from .schemas import AmendmentDiff, ReportSet
from .tools.reporter import ReportGenerator


# 1. Define State
class CloseState(TypedDict, total=False):
    ledger: Ledger
    quarter: int
    persisted: Dict[int, ReportSet]
    classification: YearClassification
    report: ReportSet
    diff: AmendmentDiff
    amended: List[int]
    next_step: str
    written: List[str]


# 2. Define Nodes

def recompute_node(state: CloseState):
    require_closed(state["quarter"], state["persisted"])
    classification = classify_year(state["ledger"])
    return {"classification": classification, "report": classification.report(state["quarter"])}


def diff_node(state: CloseState):
    diff = diff_reports(state["persisted"], state["classification"], state["quarter"])
    return {"diff": diff, "next_step": "persist" if diff.is_empty else "amend"}


def amend_node(state: CloseState):
    amended = state["diff"].amended_quarters()
    persisted = dict(state["persisted"])
    for q in amended:
        persisted[q] = state["classification"].report(q)
    return {"persisted": persisted, "amended": amended}


def make_persist_node(reporter: Optional[ReportGenerator]):
    def persist_node(state: CloseState):
        persisted = dict(state["persisted"])
        persisted[state["quarter"]] = state["report"]
        written: List[str] = []
        if reporter is not None:
            for q in state.get("amended", []):
                written += reporter.generate_report(persisted[q])
            written += reporter.generate_report(state["report"])
            path = reporter.write_amendments(state["diff"])
            if path:
                written.append(path)
        return {"persisted": persisted, "written": written}
    return persist_node


# 3. Build Graph
def build_close_workflow(reporter: Optional[ReportGenerator] = None):
    workflow = StateGraph(CloseState)

    workflow.add_node("recompute", recompute_node)
    workflow.add_node("diff", diff_node)
    workflow.add_node("amend", amend_node)
    workflow.add_node("persist", make_persist_node(reporter))

    workflow.set_entry_point("recompute")
    workflow.add_edge("recompute", "diff")
    workflow.add_conditional_edges(
        "diff",
        lambda x: x["next_step"],
        {
            "amend": "amend",
            "persist": "persist",
        }
    )
    workflow.add_edge("amend", "persist")
    workflow.add_edge("persist", END)

    return workflow.compile()


app = build_close_workflow()


def run_close(ledger: Ledger, quarter: int, persisted: Dict[int, ReportSet],
              reporter: Optional[ReportGenerator] = None) -> CloseState:
    """Closes one quarter; the returned state holds every persisted quarter, amended."""
    graph = app if reporter is None else build_close_workflow(reporter)
    return graph.invoke({"ledger": ledger, "quarter": quarter, "persisted": dict(persisted),
                         "amended": [], "written": []})

// DOM construction for the trial view. Values land in the page exactly as
// the view-model carries them.

import { PosteriorSummary } from "./types";
import {
  chartPoints,
  formatProb,
  TrialView,
  XiBar,
} from "./viewmodel";

export function el(tag: string, attrs: Record<string, string> = {},
                   children: (Node | string)[] = []): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

function probCell(value: number | null): string {
  return value === null ? "-" : formatProb(value);
}

export function renderDecisionPanel(view: TrialView): HTMLElement {
  const panel = el("section", { class: "panel" });
  panel.append(el("h2", {}, ["Decision"]));
  if (view.terminated) {
    panel.append(el("div", { class: "banner stop", "data-role": "decision" },
                    [`TRIAL TERMINATED - ${view.terminationReason ?? ""}`]));
  } else if (view.decisionText) {
    panel.append(el("div", { class: "banner", "data-role": "decision" },
                    [view.decisionText]));
  } else {
    panel.append(el("div", { class: "banner idle", "data-role": "decision" },
                    ["Awaiting first cohort"]));
  }
  if (view.assignment) {
    panel.append(el("p", {}, [
      `Next cohort: ${view.assignment.nPatients} patients at dose ` +
      `${view.assignment.doseIndex}`,
    ]));
  }

  const header = el("tr", {}, ["Dose", "Amount", "n", "DLT", "Eff",
                               "mean tox", `|mean - ${view.targetTox}|`,
                               "Pr(overdose)", "Safe"]
    .map((h) => el("th", {}, [h])));
  const table = el("table", { class: "doses" }, [header]);
  for (const row of view.doseRows) {
    table.append(el("tr", { "data-dose": String(row.doseIndex) }, [
      el("td", {}, [String(row.doseIndex)]),
      el("td", {}, [String(row.amount)]),
      el("td", {}, [String(row.n)]),
      el("td", {}, [String(row.dlt)]),
      el("td", {}, [`${row.eff}/${row.effKnown}`]),
      el("td", {}, [probCell(row.meanTox)]),
      el("td", {}, [probCell(row.distanceToTarget)]),
      el("td", {}, [probCell(row.overdoseProb)]),
      el("td", { class: row.safe === false ? "unsafe" : "" },
         [row.safe === null ? "-" : row.safe ? "yes" : "NO"]),
    ]));
  }
  panel.append(table);
  return panel;
}

export function renderGraduation(view: TrialView): HTMLElement | null {
  if (view.graduates === null) return null;
  const panel = el("section", { class: "panel" });
  panel.append(el("h2", {}, ["Graduation"]));
  if (view.graduates.length === 0) {
    panel.append(el("p", {}, ["No dose graduated."]));
    return panel;
  }
  const cards = el("div", { class: "cards" });
  for (const idx of view.graduates) {
    const classes = idx === view.selectedWithUtility ? "card selected" : "card";
    cards.append(el("div", { class: classes, "data-arm": String(idx) }, [
      el("h3", {}, [`Dose ${idx}`]),
      el("p", {}, [idx === view.selectedWithUtility
        ? "highest utility among graduates" : "graduated"]),
    ]));
  }
  panel.append(cards);
  return panel;
}

export function renderXiBars(bars: XiBar[], total: string): HTMLElement {
  const panel = el("div", { class: "xi" });
  for (const bar of bars) {
    const row = el("div", { class: "xi-row", "data-arm": String(bar.armId) });
    row.append(el("span", { class: "xi-label" },
                  [bar.inCandidateSet ? `${bar.armLabel} *` : bar.armLabel]));
    const track = el("div", { class: "xi-track" });
    const fill = el("div", { class: "xi-fill" });
    fill.style.width = `${(bar.xi * 100).toFixed(1)}%`;
    track.append(fill);
    row.append(track);
    row.append(el("span", { class: "xi-pct" }, [bar.pct]));
    panel.append(row);
  }
  panel.append(el("div", { class: "xi-total", "data-role": "xi-total" },
                  [`Sum ${total}`]));
  return panel;
}

export function renderPhase2Panel(view: TrialView): HTMLElement | null {
  if (view.phase !== "phase2" && view.recommendation === null
      && (!view.xiBars || view.phase === "phase1")) {
    if (view.phase !== "phase2" && view.phase !== "done") return null;
  }
  const panel = el("section", { class: "panel" });
  panel.append(el("h2", {}, ["Randomized comparison"]));
  if (view.phase2MaxN !== null) {
    panel.append(el("p", {}, [
      `Enrolled ${view.phase2Enrolled} of ${view.phase2MaxN}`,
    ]));
  }
  if (view.arms.length) {
    const header = el("tr", {}, ["Arm", "Eff/NoTox", "Eff/Tox", "NoEff/NoTox",
                                 "NoEff/Tox", "n"].map((h) => el("th", {}, [h])));
    const table = el("table", { class: "arms" }, [header]);
    for (const arm of view.arms) {
      table.append(el("tr", { "data-arm": String(arm.armId) }, [
        el("td", {}, [arm.armLabel]),
        el("td", {}, [String(arm.effNoTox)]),
        el("td", {}, [String(arm.effTox)]),
        el("td", {}, [String(arm.noEffNoTox)]),
        el("td", {}, [String(arm.noEffTox)]),
        el("td", {}, [String(arm.n)]),
      ]));
    }
    panel.append(table);
  }
  if (view.allocation) {
    panel.append(el("p", {}, ["Pending cohort allocation: " + view.allocation
      .map((a) => `${a.armId === 0 ? "control" : "dose " + a.armId}: ${a.n}`)
      .join(", ")]));
  }
  if (view.xiBars && view.xiTotal) {
    panel.append(el("h3", {}, ["Randomization probabilities"]));
    panel.append(renderXiBars(view.xiBars, view.xiTotal));
  }
  if (view.phase === "done") {
    panel.append(el("div", {
      class: view.recommendation === null ? "banner idle" : "banner",
      "data-role": "recommendation",
    }, [view.recommendation === null
        ? "No arm recommended"
        : `Recommended: dose ${view.recommendation}`]));
  }
  return panel;
}

export function renderPosteriorChart(post: PosteriorSummary,
                                     series: "tox" | "eff",
                                     threshold: number | null): SVGElement {
  const svgNs = "http://www.w3.org/2000/svg";
  const width = 420, height = 180, pad = 30;
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", `chart chart-${series}`);
  const points = chartPoints(post, series);
  const step = (width - 2 * pad) / Math.max(points.length - 1, 1);
  const y = (p: number) => height - pad - p * (height - 2 * pad);

  if (threshold !== null) {
    const line = document.createElementNS(svgNs, "line");
    line.setAttribute("x1", String(pad));
    line.setAttribute("x2", String(width - pad));
    line.setAttribute("y1", String(y(threshold)));
    line.setAttribute("y2", String(y(threshold)));
    line.setAttribute("class", "threshold");
    svg.append(line);
  }
  points.forEach((pt, i) => {
    const x = pad + i * step;
    const band = document.createElementNS(svgNs, "line");
    band.setAttribute("x1", String(x));
    band.setAttribute("x2", String(x));
    band.setAttribute("y1", String(y(pt.lo)));
    band.setAttribute("y2", String(y(pt.hi)));
    band.setAttribute("class", "band");
    svg.append(band);
    const dot = document.createElementNS(svgNs, "circle");
    dot.setAttribute("cx", String(x));
    dot.setAttribute("cy", String(y(pt.mean)));
    dot.setAttribute("r", "3.5");
    dot.setAttribute("class", "mean");
    svg.append(dot);
    const label = document.createElementNS(svgNs, "text");
    label.setAttribute("x", String(x));
    label.setAttribute("y", String(height - 8));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "axis");
    label.textContent = String(pt.amount);
    svg.append(label);
  });
  return svg;
}

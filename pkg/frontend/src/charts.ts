/** Small hand-rolled SVG charts: a Pareto scatter with the consensus
 *  plan starred, a vote-histogram bar chart, and an uncertainty trace. */

import type { MlaspView, ParetoPointView, VoteRow } from "./api.js";
import { sig } from "./format.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svg(
  doc: Document,
  width: number,
  height: number,
  cls: string,
): SVGSVGElement {
  const el = doc.createElementNS(SVG_NS, "svg");
  el.setAttribute("width", String(width));
  el.setAttribute("height", String(height));
  el.setAttribute("viewBox", `0 0 ${width} ${height}`);
  el.setAttribute("class", cls);
  return el;
}

function scale(
  values: number[],
  lo: number,
  hi: number,
): (v: number) => number {
  const min = Math.min(...values);
  const max = Math.max(...values);
  const span = max - min || 1;
  return (v) => lo + ((v - min) / span) * (hi - lo);
}

export function paretoScatter(
  doc: Document,
  points: ParetoPointView[],
  highlightSpend: number | null,
  width = 360,
  height = 220,
): SVGSVGElement {
  const chart = svg(doc, width, height, "pareto-chart");
  if (!points.length) return chart;
  const xs = scale(points.map((p) => p.spend), 40, width - 12);
  const ys = scale(points.map((p) => p.tolerance), height - 28, 14);
  for (const p of points) {
    const dot = doc.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(xs(p.spend)));
    dot.setAttribute("cy", String(ys(p.tolerance)));
    dot.setAttribute("r", p.dominated ? "3" : "5");
    dot.setAttribute("class", p.dominated ? "pt dominated" : "pt front");
    dot.setAttribute(
      "data-point",
      JSON.stringify({ spend: p.spend, tolerance: p.tolerance }),
    );
    const tip = doc.createElementNS(SVG_NS, "title");
    tip.textContent =
      `${p.sweep}=${p.tolerance} spend=${p.spend} start=${p.first_action}`;
    dot.appendChild(tip);
    chart.appendChild(dot);
  }
  if (highlightSpend !== null) {
    const star = doc.createElementNS(SVG_NS, "text");
    const match = points.find((p) => p.spend === highlightSpend);
    if (match) {
      star.textContent = "★";
      star.setAttribute("x", String(xs(match.spend) - 6));
      star.setAttribute("y", String(ys(match.tolerance) - 8));
      star.setAttribute("class", "mlasp-star");
      chart.appendChild(star);
    }
  }
  return chart;
}

export function voteBars(
  doc: Document,
  votes: VoteRow[],
  width = 360,
  barHeight = 20,
): SVGSVGElement {
  const rows = votes.filter((v) => v.action !== "abstain" || v.votes > 0);
  const height = rows.length * (barHeight + 6) + 8;
  const chart = svg(doc, width, Math.max(height, 30), "vote-chart");
  const maxVotes = Math.max(1, ...rows.map((v) => v.votes));
  rows.forEach((row, i) => {
    const y = 4 + i * (barHeight + 6);
    const bar = doc.createElementNS(SVG_NS, "rect");
    bar.setAttribute("x", "120");
    bar.setAttribute("y", String(y));
    bar.setAttribute("height", String(barHeight));
    bar.setAttribute("width", String((row.votes / maxVotes) * (width - 170)));
    bar.setAttribute("class", row.action === "abstain" ? "bar abstain" : "bar");
    bar.setAttribute("data-votes", String(row.votes));
    chart.appendChild(bar);
    const label = doc.createElementNS(SVG_NS, "text");
    label.textContent = row.action;
    label.setAttribute("x", "4");
    label.setAttribute("y", String(y + barHeight - 5));
    label.setAttribute("class", "bar-label");
    chart.appendChild(label);
    const count = doc.createElementNS(SVG_NS, "text");
    count.textContent = String(row.votes);
    count.setAttribute("x", String(width - 36));
    count.setAttribute("y", String(y + barHeight - 5));
    count.setAttribute("class", "bar-count");
    chart.appendChild(count);
  });
  return chart;
}

export function uncertaintyTrace(
  doc: Document,
  initialH: number,
  mlasp: MlaspView,
  width = 360,
  height = 160,
): SVGSVGElement {
  const chart = svg(doc, width, height, "h-trace");
  const hs = [initialH, ...mlasp.steps.map((s) => s.post_step_h)];
  const xs = scale(hs.map((_, i) => i), 30, width - 14);
  const ys = scale([...hs, 0], height - 22, 12);
  const path = doc.createElementNS(SVG_NS, "polyline");
  path.setAttribute(
    "points",
    hs.map((h, i) => `${xs(i)},${ys(h)}`).join(" "),
  );
  path.setAttribute("class", "trace-line");
  path.setAttribute("fill", "none");
  chart.appendChild(path);
  hs.forEach((h, i) => {
    const dot = doc.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(xs(i)));
    dot.setAttribute("cy", String(ys(h)));
    dot.setAttribute("r", "4");
    dot.setAttribute("class", "trace-dot");
    dot.setAttribute("data-h", String(h));
    const tip = doc.createElementNS(SVG_NS, "title");
    tip.textContent = `step ${i}: H=${sig(h, 6)}`;
    dot.appendChild(tip);
    chart.appendChild(dot);
  });
  return chart;
}

/** Session screen wiring: create a session from the candidate form, show
 *  the recommended plan, record lab outcomes as they arrive, and replan.
 *
 *  The view is stateless beyond the session id: every render pulls fresh
 *  JSON from the service and a page refresh reconstructs the screen from
 *  GETs alone.  At most one replan request is in flight at a time.
 */

import {
  ApiError,
  BeliefView,
  PlannerApi,
  Recommendation,
  RecommendationOverrides,
} from "./api.js";
import { paretoScatter, uncertaintyTrace, voteBars } from "./charts.js";
import { money, numberCell, percent, sig } from "./format.js";

export class SessionScreen {
  sessionId: string | null = null;
  initialH: number | null = null;
  private planInFlight = false;
  private lastOverrides: RecommendationOverrides = {};

  constructor(
    private doc: Document,
    private api: PlannerApi,
    private root: HTMLElement,
  ) {
    this.renderSkeleton();
  }

  // -- layout ---------------------------------------------------------------

  private el(id: string): HTMLElement {
    const found = this.doc.getElementById(id);
    if (!found) throw new Error(`missing element #${id}`);
    return found;
  }

  private renderSkeleton() {
    this.root.innerHTML = `
      <section id="start-panel">
        <h2>New candidate</h2>
        <form id="candidate-form">
          <textarea id="candidate-features" rows="4"
            placeholder="pred_a = -0.18&#10;pred_b = -0.68"></textarea>
          <button type="submit" id="start-button">Start session</button>
        </form>
        <div id="start-error" class="error" hidden></div>
      </section>
      <section id="session-panel" hidden>
        <h2>Session <span id="session-id"></span></h2>
        <div id="gauges">
          <div class="gauge">H <span id="h-value"></span></div>
          <div class="gauge">L <span id="l-value"></span></div>
          <div class="gauge">E[g] <span id="g-mean"></span></div>
        </div>
        <div id="measured"></div>
        <h3>Most relevant analogs</h3>
        <table id="analogs"><tbody></tbody></table>
        <h3>Record outcomes</h3>
        <form id="outcome-form">
          <div id="outcome-inputs"></div>
          <button type="submit" id="outcome-button">Submit outcomes</button>
        </form>
        <div id="outcome-error" class="error" hidden></div>
        <h3>Plan</h3>
        <div id="threshold-controls">
          <label>tau <input type="range" id="tau-slider" min="0" max="1"
            step="0.05" value="0.6"><span id="tau-value">0.6</span></label>
          <label>epsilon <input type="range" id="epsilon-slider" min="0.01"
            max="1" step="0.01" value="0.1"><span id="epsilon-value">0.1</span></label>
          <button id="replan-button" type="button">Replan</button>
          <label>compare with tau
            <input type="number" id="tau-compare" min="0" max="1" step="0.05"
              value="0.9" size="4">
          </label>
          <button id="compare-button" type="button">Compare</button>
        </div>
        <div id="plan-status"></div>
        <div id="plan-panel"></div>
        <div id="compare-panel" hidden>
          <h3>Side by side</h3>
          <div class="compare-grid">
            <div id="compare-left"></div>
            <div id="compare-right"></div>
          </div>
        </div>
      </section>
      <div id="offline-banner" class="banner" hidden>
        Server unreachable, retrying...
      </div>
    `;
    const form = this.el("candidate-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.startSession();
    });
    (this.el("outcome-form") as HTMLFormElement).addEventListener(
      "submit",
      (ev) => {
        ev.preventDefault();
        void this.submitOutcomes();
      },
    );
    this.el("replan-button").addEventListener("click", () => {
      void this.replan();
    });
    this.el("compare-button").addEventListener("click", () => {
      void this.compareThresholds();
    });
    const tau = this.el("tau-slider") as HTMLInputElement;
    tau.addEventListener("input", () => {
      this.el("tau-value").textContent = tau.value;
    });
    const epsilon = this.el("epsilon-slider") as HTMLInputElement;
    epsilon.addEventListener("input", () => {
      this.el("epsilon-value").textContent = epsilon.value;
    });
  }

  // -- session flow -----------------------------------------------------------

  parseCandidate(text: string): Record<string, number> {
    const features: Record<string, number> = {};
    for (const line of text.split("\n")) {
      const trimmed = line.trim();
      if (!trimmed || trimmed.startsWith("#")) continue;
      const [key, value] = trimmed.split("=").map((s) => s.trim());
      if (!key || value === undefined || Number.isNaN(Number(value))) {
        throw new Error(`bad candidate line: ${trimmed}`);
      }
      features[key] = Number(value);
    }
    return features;
  }

  async startSession(): Promise<void> {
    const errorBox = this.el("start-error");
    errorBox.hidden = true;
    const text = (this.el("candidate-features") as HTMLTextAreaElement).value;
    let features: Record<string, number>;
    try {
      features = this.parseCandidate(text);
    } catch (err) {
      errorBox.textContent = String(err);
      errorBox.hidden = false;
      return;
    }
    try {
      const created = await this.api.createSession(features);
      this.sessionId = created.session_id;
      this.initialH = created.h;
      this.el("session-id").textContent = created.session_id;
      this.el("session-panel").hidden = false;
      await this.refreshBelief();
    } catch (err) {
      if (err instanceof ApiError) {
        errorBox.textContent = err.message;
        errorBox.hidden = false;
      } else {
        this.showOffline(true);
      }
    }
  }

  async refreshBelief(): Promise<BeliefView | null> {
    if (!this.sessionId) return null;
    try {
      const belief = await this.api.belief(this.sessionId);
      this.renderBelief(belief);
      this.showOffline(false);
      return belief;
    } catch (err) {
      if (!(err instanceof ApiError)) this.showOffline(true);
      return null;
    }
  }

  renderBelief(belief: BeliefView) {
    const put = (id: string, value: number) => {
      const host = this.el(id);
      host.innerHTML = "";
      host.appendChild(numberCell(this.doc, value));
    };
    put("h-value", belief.h);
    put("l-value", belief.l);
    put("g-mean", belief.g_mean);
    this.el("measured").textContent = belief.measured_assays.length
      ? `measured: ${belief.measured_assays.join(", ")}`
      : "nothing measured yet";
    const tbody = this.el("analogs").querySelector("tbody")!;
    tbody.innerHTML = "";
    for (const analog of belief.top_analogs) {
      const row = this.doc.createElement("tr");
      row.dataset.recordIndex = String(analog.record_index);
      const id = this.doc.createElement("td");
      id.textContent = analog.record_id;
      const weight = this.doc.createElement("td");
      weight.appendChild(numberCell(this.doc, analog.weight, 5));
      const target = this.doc.createElement("td");
      if (analog.target !== null) {
        target.appendChild(numberCell(this.doc, analog.target));
      } else {
        target.textContent = "-";
      }
      row.append(id, weight, target);
      tbody.appendChild(row);
    }
  }

  // -- outcomes ----------------------------------------------------------------

  setOutcomeAssays(assayIds: string[], measured: string[]) {
    const host = this.el("outcome-inputs");
    host.innerHTML = "";
    for (const assay of assayIds) {
      const label = this.doc.createElement("label");
      label.textContent = assay;
      const input = this.doc.createElement("input");
      input.type = "number";
      input.step = "any";
      input.name = assay;
      input.id = `outcome-${assay}`;
      if (measured.includes(assay)) {
        input.disabled = true;
        input.title = "already measured";
      }
      label.appendChild(input);
      host.appendChild(label);
    }
  }

  collectOutcomes(): Record<string, number> {
    const outcomes: Record<string, number> = {};
    const inputs = this.el("outcome-inputs").querySelectorAll("input");
    inputs.forEach((input) => {
      if (!input.disabled && input.value.trim() !== "") {
        outcomes[input.name] = Number(input.value);
      }
    });
    return outcomes;
  }

  async submitOutcomes(): Promise<void> {
    if (!this.sessionId) return;
    const errorBox = this.el("outcome-error");
    errorBox.hidden = true;
    const outcomes = this.collectOutcomes();
    if (!Object.keys(outcomes).length) return;
    try {
      const updated = await this.api.recordOutcomes(this.sessionId, outcomes);
      this.renderBelief(updated);
      for (const assay of Object.keys(outcomes)) {
        const input = this.doc.getElementById(
          `outcome-${assay}`,
        ) as HTMLInputElement | null;
        if (input) {
          input.disabled = true;
          input.title = "already measured";
        }
      }
      this.el("plan-status").textContent =
        "belief updated - replan to refresh the recommendation";
    } catch (err) {
      if (err instanceof ApiError) {
        errorBox.textContent = err.message;
        errorBox.hidden = false;
      } else {
        this.showOffline(true);
      }
    }
  }

  // -- planning ----------------------------------------------------------------

  currentOverrides(): RecommendationOverrides {
    const tau = Number((this.el("tau-slider") as HTMLInputElement).value);
    const epsilon = Number(
      (this.el("epsilon-slider") as HTMLInputElement).value,
    );
    return { tau, epsilon };
  }

  async replan(extra: RecommendationOverrides = {}): Promise<void> {
    if (!this.sessionId || this.planInFlight) return;
    this.planInFlight = true;
    this.el("plan-status").textContent = "planning...";
    this.lastOverrides = { ...this.currentOverrides(), ...extra };
    try {
      const rec = await this.api.recommendation(
        this.sessionId,
        this.lastOverrides,
      );
      this.renderPlan(rec);
      this.el("plan-status").textContent = "";
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.el("plan-panel").innerHTML =
          `<div class="plan-complete">Plan complete: ${err.message}</div>`;
        this.el("plan-status").textContent = "";
      } else if (err instanceof ApiError) {
        this.el("plan-status").textContent = err.message;
      } else {
        this.showOffline(true);
        this.el("plan-status").textContent = "";
      }
    } finally {
      this.planInFlight = false;
    }
  }

  /** Fetch plans for the slider tau and the comparison tau and render
   *  them next to each other (overrides only; nothing is replayed). */
  async compareThresholds(): Promise<void> {
    if (!this.sessionId || this.planInFlight) return;
    this.planInFlight = true;
    this.el("plan-status").textContent = "comparing...";
    const base = this.currentOverrides();
    const other = Number((this.el("tau-compare") as HTMLInputElement).value);
    try {
      const [left, right] = await Promise.all([
        this.api.recommendation(this.sessionId, base),
        this.api.recommendation(this.sessionId, { ...base, tau: other }),
      ]);
      this.el("compare-panel").hidden = false;
      this.renderPlanInto(this.el("compare-left"), left, `tau = ${base.tau}`);
      this.renderPlanInto(this.el("compare-right"), right, `tau = ${other}`);
      this.el("plan-status").textContent = "";
    } catch (err) {
      this.el("plan-status").textContent =
        err instanceof ApiError ? err.message : "comparison failed";
    } finally {
      this.planInFlight = false;
    }
  }

  private renderPlanInto(host: HTMLElement, rec: Recommendation, label: string) {
    host.innerHTML = "";
    const title = this.doc.createElement("h4");
    title.textContent = label;
    const summary = this.doc.createElement("div");
    summary.className = "compare-summary";
    summary.append(
      `${rec.mlasp.constraint_met ? "met" : "unmet"}, ` +
      `spend ${money(rec.mlasp.total_cost, rec.mlasp.cost_components)}, final H = `,
    );
    summary.appendChild(numberCell(this.doc, rec.mlasp.final_h));
    const steps = this.doc.createElement("ol");
    for (const step of rec.mlasp.steps) {
      const item = this.doc.createElement("li");
      item.textContent = step.stop ? "stop" : step.assays.join(" + ");
      steps.appendChild(item);
    }
    host.append(title, summary, steps);
  }

  renderPlan(rec: Recommendation) {
    const panel = this.el("plan-panel");
    panel.innerHTML = "";

    const steps = this.doc.createElement("ol");
    steps.id = "mlasp-steps";
    for (const step of rec.mlasp.steps) {
      const item = this.doc.createElement("li");
      const label = step.stop ? "stop" : step.assays.join(" + ");
      item.textContent =
        `${label} (${percent(step.vote_fraction)} of votes, ` +
        `spent ${money(step.cumulative_cost, rec.mlasp.cost_components)}, ` +
        `H → `;
      item.appendChild(numberCell(this.doc, step.post_step_h));
      item.append(")");
      steps.appendChild(item);
    }
    const heading = this.doc.createElement("div");
    heading.id = "plan-summary";
    heading.append(
      `${rec.mlasp.constraint_met ? "constraint met" : "constraint unmet"}, final H = `,
    );
    heading.appendChild(numberCell(this.doc, rec.mlasp.final_h));
    heading.append(
      `, total ${money(rec.mlasp.total_cost, rec.mlasp.cost_components)}`,
    );
    panel.append(heading, steps);

    const spend = rec.mlasp.total_cost.length ? rec.mlasp.total_cost[0] : null;
    panel.appendChild(paretoScatter(this.doc, rec.pareto, spend));
    panel.appendChild(voteBars(this.doc, rec.votes));
    if (this.initialH !== null) {
      panel.appendChild(uncertaintyTrace(this.doc, rec.h, rec.mlasp));
    }
  }

  private showOffline(offline: boolean) {
    this.el("offline-banner").hidden = !offline;
  }
}

export function mount(doc: Document, baseUrl = ""): SessionScreen {
  const root = doc.getElementById("app");
  if (!root) throw new Error("missing #app element");
  return new SessionScreen(doc, new PlannerApi(baseUrl), root);
}

// Run monitor and compare view: status polling, per-run choropleths, a
// treated-vs-control delta layer, and the metrics table. Every number
// shown comes from a server payload.

import type { ApiClient } from "../api";
import { ApiError } from "../api";
import { renderChoropleth, renderDeltaLayer } from "../heatmap";
import { RunPoller } from "../poll";
import type { CityCell, CompareResponse, EvaluationReport, RunRecord } from "../types";

const METRIC_LABELS: [keyof EvaluationReport, string][] = [
  ["jsd", "JSD"],
  ["rmse", "RMSE"],
  ["hotspot_crime_ratio", "hotspot crime ratio"],
  ["nhc", "new hotspot concordance"],
  ["mean_distance_km", "mean residence-crime distance (km)"],
];

export function formatNumber(value: number): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(6);
}

export function metricsTable(doc: Document, report: EvaluationReport): HTMLTableElement {
  const table = doc.createElement("table");
  table.className = "metrics";
  const rows: [string, string][] = [];
  for (const k of Object.keys(report.hr).sort((a, b) => Number(a) - Number(b))) {
    rows.push([`HR@${k}`, formatNumber(report.hr[k])]);
  }
  for (const [key, label] of METRIC_LABELS) {
    const value = report[key];
    if (typeof value === "number") rows.push([label, formatNumber(value)]);
  }
  for (const [label, value] of rows) {
    const tr = doc.createElement("tr");
    const th = doc.createElement("th");
    th.textContent = label;
    const td = doc.createElement("td");
    td.textContent = value;
    tr.appendChild(th);
    tr.appendChild(td);
    table.appendChild(tr);
  }
  return table;
}

export interface ComparePanelData {
  compare: CompareResponse;
  treatedMetrics?: EvaluationReport;
  controlMetrics?: EvaluationReport;
}

export function renderComparePanel(
  doc: Document,
  cells: CityCell[],
  data: ComparePanelData,
): HTMLElement {
  const { compare } = data;
  const panel = doc.createElement("div");
  panel.className = "compare-panel";

  const totals = doc.createElement("p");
  totals.className = "compare-totals";
  totals.textContent =
    `treated ${compare.run_a.run_id}: ${compare.run_a.total} events | ` +
    `control ${compare.run_b.run_id}: ${compare.run_b.total} events | ` +
    `delta ${compare.delta.total}`;
  panel.appendChild(totals);

  const direction = doc.createElement("p");
  direction.className = "compare-direction";
  direction.textContent = compare.run_a.total <= compare.run_b.total
    ? "treated run produced no more crime than control"
    : "treated run produced more crime than control";
  panel.appendChild(direction);

  const maps = doc.createElement("div");
  maps.className = "compare-maps";
  const sides: [string, (c: typeof compare.cells[number]) => number, string][] = [
    ["treated", (c) => c.share_a, "share"],
    ["control", (c) => c.share_b, "share"],
  ];
  for (const [label, shareOf] of sides) {
    const fig = doc.createElement("figure");
    const caption = doc.createElement("figcaption");
    caption.textContent = label;
    fig.appendChild(caption);
    fig.appendChild(renderChoropleth(doc, cells, compare.cells.map((c) => ({
      cellId: c.cell_id,
      value: shareOf(c),
      label: `${label} share ${shareOf(c).toFixed(4)}`,
    }))));
    maps.appendChild(fig);
  }
  const deltaFig = doc.createElement("figure");
  const deltaCaption = doc.createElement("figcaption");
  deltaCaption.textContent = "delta (treated - control)";
  deltaFig.appendChild(deltaCaption);
  deltaFig.appendChild(renderDeltaLayer(
    doc, cells, new Map(compare.cells.map((c) => [c.cell_id, c.count_a - c.count_b]))));
  maps.appendChild(deltaFig);
  panel.appendChild(maps);

  const tables = doc.createElement("div");
  tables.className = "compare-metrics";
  for (const [label, report] of [["treated", data.treatedMetrics],
                                 ["control", data.controlMetrics]] as const) {
    if (!report) continue;
    const wrap = doc.createElement("div");
    const h = doc.createElement("h3");
    h.textContent = `${label} vs ground truth`;
    wrap.appendChild(h);
    wrap.appendChild(metricsTable(doc, report));
    tables.appendChild(wrap);
  }
  panel.appendChild(tables);
  return panel;
}

export class MonitorView {
  readonly root: HTMLElement;
  private poller: RunPoller;
  private records = new Map<string, RunRecord>();

  constructor(
    private doc: Document,
    private api: ApiClient,
    private cells: CityCell[],
  ) {
    this.root = doc.createElement("section");
    this.root.className = "monitor";
    this.poller = new RunPoller(api);
    this.render();
  }

  /** Track a run and refresh its row until it settles. */
  async track(runId: string): Promise<RunRecord> {
    const record = await this.poller.waitForRun(runId, (update) => {
      this.records.set(runId, update);
      this.render();
    });
    return record;
  }

  async showCompare(treatedId: string, controlId: string,
                    against?: string): Promise<void> {
    const compare = await this.api.compare(treatedId, controlId);
    let treatedMetrics: EvaluationReport | undefined;
    let controlMetrics: EvaluationReport | undefined;
    if (against) {
      treatedMetrics = await this.api.getMetrics(treatedId, against, 0.2, "1.0,1.5,2.0");
      controlMetrics = await this.api.getMetrics(controlId, against, 0.2, "1.0,1.5,2.0");
    }
    const panel = renderComparePanel(this.doc, this.cells,
                                     { compare, treatedMetrics, controlMetrics });
    const old = this.root.querySelector(".compare-panel");
    if (old) old.replaceWith(panel);
    else this.root.appendChild(panel);
  }

  render(): void {
    let list = this.root.querySelector(".run-list");
    if (!list) {
      list = this.doc.createElement("ul");
      list.className = "run-list";
      this.root.appendChild(list);
    }
    list.innerHTML = "";
    for (const [runId, record] of this.records) {
      const item = this.doc.createElement("li");
      item.dataset.runId = runId;
      item.textContent = `${runId}: ${record.status}`
        + (record.total_events !== null ? ` (${record.total_events} events)` : "");
      if (record.status === "failed" && record.error) {
        const err = this.doc.createElement("span");
        err.className = "server-error";
        err.textContent = ` ${record.error}`;  // server text verbatim
        item.appendChild(err);
      }
      list.appendChild(item);
    }
  }
}

export { ApiError };

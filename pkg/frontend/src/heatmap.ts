// Standalone SVG choropleth: renders cell polygons (or centroid squares)
// directly from server geometry, no basemap required. Hovering a cell
// shows its id, the plotted value, and the static features.

import { colorFor, deltaColor, quantileBreaks } from "./color";
import type { CityCell } from "./types";

export interface CellValue {
  cellId: string;
  value: number;
  label: string;
}

interface Bounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}

function boundsOf(cells: CityCell[]): Bounds {
  const b: Bounds = { minLat: 90, maxLat: -90, minLon: 180, maxLon: -180 };
  for (const cell of cells) {
    const points = cell.boundary ?? [cell.centroid];
    for (const [lat, lon] of points) {
      b.minLat = Math.min(b.minLat, lat);
      b.maxLat = Math.max(b.maxLat, lat);
      b.minLon = Math.min(b.minLon, lon);
      b.maxLon = Math.max(b.maxLon, lon);
    }
  }
  return b;
}

const SIZE = 420;
const PAD = 10;

function project(lat: number, lon: number, b: Bounds): [number, number] {
  const spanLat = Math.max(1e-9, b.maxLat - b.minLat);
  const spanLon = Math.max(1e-9, b.maxLon - b.minLon);
  const x = PAD + ((lon - b.minLon) / spanLon) * (SIZE - 2 * PAD);
  const y = PAD + ((b.maxLat - lat) / spanLat) * (SIZE - 2 * PAD);
  return [x, y];
}

function cellPath(cell: CityCell, b: Bounds): string {
  if (cell.boundary && cell.boundary.length >= 4) {
    const pts = cell.boundary.map(([lat, lon]) => project(lat, lon, b));
    return `M${pts.map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`).join("L")}Z`;
  }
  const [x, y] = project(cell.centroid[0], cell.centroid[1], b);
  const r = 4;
  return `M${x - r},${y - r}h${2 * r}v${2 * r}h${-2 * r}Z`;
}

function featureTitle(cell: CityCell, label: string): string {
  const f = cell.features;
  return [
    `${cell.cell_id}: ${label}`,
    `population ${f.population}, poi ${f.poi_count}`,
    `income $${f.average_income}, poverty ${f.poverty_ratio}`,
    `safety ${f.safety_score}`,
    f.semantic_description,
  ].join("\n");
}

export function renderChoropleth(
  doc: Document,
  cells: CityCell[],
  values: CellValue[],
): SVGSVGElement {
  const byId = new Map(values.map((v) => [v.cellId, v]));
  const breaks = quantileBreaks(values.map((v) => v.value));
  const b = boundsOf(cells);
  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${SIZE} ${SIZE}`);
  svg.setAttribute("class", "choropleth");
  for (const cell of cells) {
    const value = byId.get(cell.cell_id);
    const path = doc.createElementNS("http://www.w3.org/2000/svg", "path");
    path.setAttribute("d", cellPath(cell, b));
    path.setAttribute("fill", colorFor(value?.value ?? 0, breaks));
    path.setAttribute("stroke", "#999");
    path.setAttribute("stroke-width", "0.5");
    path.setAttribute("data-cell-id", cell.cell_id);
    const title = doc.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = featureTitle(cell, value?.label ?? "no data");
    path.appendChild(title);
    svg.appendChild(path);
  }
  return svg;
}

export function renderDeltaLayer(
  doc: Document,
  cells: CityCell[],
  deltas: Map<string, number>,
): SVGSVGElement {
  const maxAbs = Math.max(0, ...[...deltas.values()].map(Math.abs));
  const b = boundsOf(cells);
  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${SIZE} ${SIZE}`);
  svg.setAttribute("class", "choropleth delta");
  for (const cell of cells) {
    const delta = deltas.get(cell.cell_id) ?? 0;
    const path = doc.createElementNS("http://www.w3.org/2000/svg", "path");
    path.setAttribute("d", cellPath(cell, b));
    path.setAttribute("fill", deltaColor(delta, maxAbs));
    path.setAttribute("stroke", "#999");
    path.setAttribute("stroke-width", "0.5");
    path.setAttribute("data-cell-id", cell.cell_id);
    const title = doc.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = `${cell.cell_id}: delta ${delta >= 0 ? "+" : ""}${delta}`;
    path.appendChild(title);
    svg.appendChild(path);
  }
  return svg;
}

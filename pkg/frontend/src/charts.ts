/**
 * DOM-rendered charts: a signed horizontal bar chart for attributions and
 * an SVG polyline for rolling metrics. Values are displayed verbatim;
 * only bar widths and point positions are scaled for layout.
 */

const SVG_NS = "http://www.w3.org/2000/svg";

export function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

/** Signed horizontal bars: positive to the right, negative to the left. */
export function attributionBarChart(
  doc: Document,
  attributions: number[],
  labels?: string[],
): HTMLElement {
  const chart = el(doc, "div", { class: "attr-chart" });
  const scale = Math.max(...attributions.map(Math.abs), 1e-12);
  attributions.forEach((value, i) => {
    const width = (Math.abs(value) / scale) * 50;
    const row = el(doc, "div", { class: "attr-row" });
    row.append(
      el(doc, "span", { class: "attr-label" }, [labels?.[i] ?? `f${i}`]),
    );
    const track = el(doc, "div", { class: "attr-track" });
    const bar = el(doc, "div", {
      class: value >= 0 ? "attr-bar positive" : "attr-bar negative",
      style:
        value >= 0
          ? `margin-left:50%;width:${width}%`
          : `margin-left:${50 - width}%;width:${width}%`,
    });
    track.append(bar);
    row.append(track);
    row.append(
      el(doc, "span", { class: "attr-value", "data-value": String(value) },
         [String(value)]),
    );
    chart.append(row);
  });
  return chart;
}

/** Tiny inline line chart; null points are skipped. */
export function sparkline(
  doc: Document,
  values: (number | null)[],
  width = 160,
  height = 36,
): Element {
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "sparkline");
  const points = values
    .map((v, i) => [i, v] as const)
    .filter((pair): pair is readonly [number, number] => pair[1] !== null);
  if (points.length === 0) {
    return svg;
  }
  const ys = points.map(([, v]) => v);
  const lo = Math.min(...ys);
  const hi = Math.max(...ys);
  const span = hi - lo || 1;
  const step = points.length > 1 ? width / (points.length - 1) : 0;
  const polyline = doc.createElementNS(SVG_NS, "polyline");
  polyline.setAttribute(
    "points",
    points
      .map(([i, v], idx) =>
        `${points.length > 1 ? idx * step : width / 2},${
          height - 4 - ((v - lo) / span) * (height - 8)
        }`,
      )
      .join(" "),
  );
  polyline.setAttribute("fill", "none");
  polyline.setAttribute("stroke", "currentColor");
  svg.append(polyline);
  return svg;
}

/** Counterfactual diff: original vs changed value per moved feature. */
export function counterfactualDiff(
  doc: Document,
  input: number[],
  counterfactual: number[],
): HTMLElement {
  const table = el(doc, "table", { class: "cf-diff" });
  const header = el(doc, "tr");
  for (const text of ["feature", "current", "counterfactual"]) {
    header.append(el(doc, "th", {}, [text]));
  }
  table.append(header);
  input.forEach((value, i) => {
    if (value === counterfactual[i]) return;
    const row = el(doc, "tr", { class: "cf-moved" });
    row.append(el(doc, "td", {}, [`f${i}`]));
    row.append(el(doc, "td", {}, [String(value)]));
    row.append(el(doc, "td", {}, [String(counterfactual[i])]));
    table.append(row);
  });
  return table;
}

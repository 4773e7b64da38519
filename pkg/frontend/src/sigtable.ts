// Significance table rendering. Every number shown here is copied verbatim
// from the report; the UI never recomputes statistics. The one piece of
// geometry we derive is the CI bar position, which is pure presentation.

import { Analysis, TukeyPair } from "./types.js";

export type SortKey = "p_adj" | "mean_diff" | "group";

export function tukeyRows(analysis: Analysis): TukeyPair[] {
  return analysis.tukey === null ? [] : analysis.tukey.pairs.slice();
}

export function sortRows(rows: readonly TukeyPair[], key: SortKey): TukeyPair[] {
  const out = rows.slice();
  switch (key) {
    case "p_adj":
      out.sort((a, b) => a.p_adj - b.p_adj);
      break;
    case "mean_diff":
      // largest absolute difference first
      out.sort((a, b) => Math.abs(b.mean_diff) - Math.abs(a.mean_diff));
      break;
    case "group":
      out.sort((a, b) =>
        `${a.group1}|${a.group2}`.localeCompare(`${b.group1}|${b.group2}`),
      );
      break;
  }
  return out;
}

export function ciExcludesZero(pair: TukeyPair): boolean {
  return pair.ci_low > 0 || pair.ci_high < 0;
}

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// Shared symmetric scale so bars in one table are comparable. Positions are
// fractions of the bar track width.
function ciBar(pair: TukeyPair, scale: number): string {
  const pos = (v: number) => (50 + (v / scale) * 50).toFixed(2);
  const left = pos(Math.min(pair.ci_low, pair.ci_high));
  const right = pos(Math.max(pair.ci_low, pair.ci_high));
  const mid = pos(pair.mean_diff);
  const cls = ciExcludesZero(pair) ? "ci-bar ci-excludes" : "ci-bar";
  return (
    `<div class="ci-track">` +
    `<span class="ci-zero" style="left:50%"></span>` +
    `<span class="${cls}" style="left:${left}%;width:${(
      Number(right) - Number(left)
    ).toFixed(2)}%"></span>` +
    `<span class="ci-mid" style="left:${mid}%"></span>` +
    `</div>`
  );
}

export function renderSignificanceTable(
  analysis: Analysis,
  sortKey: SortKey = "p_adj",
): string {
  const rows = sortRows(tukeyRows(analysis), sortKey);
  if (rows.length === 0) {
    return `<p class="empty">no pairwise comparisons for this analysis</p>`;
  }
  const scale =
    Math.max(...rows.map((r) => Math.max(Math.abs(r.ci_low), Math.abs(r.ci_high)))) ||
    1;
  const body = rows
    .map((r) => {
      const cls = r.reject ? ` class="reject"` : "";
      return (
        `<tr${cls}>` +
        `<td>${esc(r.group1)}</td>` +
        `<td>${esc(r.group2)}</td>` +
        `<td class="num">${String(r.mean_diff)}</td>` +
        `<td class="num">${String(r.p_adj)}</td>` +
        `<td class="num">[${String(r.ci_low)}, ${String(r.ci_high)}]</td>` +
        `<td>${ciBar(r, scale)}</td>` +
        `<td>${r.reject ? "yes" : "no"}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="sig-table">` +
    `<thead><tr><th>group 1</th><th>group 2</th><th data-sort="mean_diff">mean diff</th>` +
    `<th data-sort="p_adj">p (adj)</th><th>CI</th><th></th><th>reject</th></tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderAnovaTable(analysis: Analysis): string {
  const a = analysis.anova;
  const cells: [string, string][] = [
    ["F", String(a.f)],
    ["p", String(a.p_value)],
    ["df between", String(a.df_between)],
    ["df within", String(a.df_within)],
    ["MS between", String(a.msb)],
    ["MS within", String(a.msw)],
    ["R²", String(a.r_squared)],
  ];
  const body = cells
    .map(([k, v]) => `<tr><th>${esc(k)}</th><td class="num">${esc(v)}</td></tr>`)
    .join("");
  return `<table class="anova-table"><tbody>${body}</tbody></table>`;
}

export function renderGroupsTable(analysis: Analysis): string {
  const header =
    `<thead><tr><th>group</th><th>n</th><th>mean</th><th>median</th>` +
    `<th>q1</th><th>q3</th><th>outliers</th></tr></thead>`;
  const body = analysis.groups
    .map(
      (g) =>
        `<tr><td>${esc(g.label)}</td>` +
        `<td class="num">${String(g.box.n)}</td>` +
        `<td class="num">${String(g.box.mean)}</td>` +
        `<td class="num">${String(g.box.median)}</td>` +
        `<td class="num">${String(g.box.q1)}</td>` +
        `<td class="num">${String(g.box.q3)}</td>` +
        `<td class="num">${String(g.box.outliers.length)}</td></tr>`,
    )
    .join("");
  return `<table class="groups-table">${header}<tbody>${body}</tbody></table>`;
}

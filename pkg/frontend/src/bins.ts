// Bin editor state: a buffer of edge strings the user can edit freely,
// validated as a whole. Submission is gated on the buffer being a strictly
// increasing list of at least two numbers; nothing invalid ever reaches
// the server.

import { Analysis, BinRuleBody } from "./types.js";

export interface EdgeValidation {
  ok: boolean;
  edges: number[]; // parsed values, only meaningful when ok
  errors: string[];
}

export function validateEdges(raw: readonly (string | number)[]): EdgeValidation {
  const errors: string[] = [];
  const edges: number[] = [];
  raw.forEach((entry, i) => {
    const v = typeof entry === "number" ? entry : Number(String(entry).trim());
    if (!Number.isFinite(v)) {
      errors.push(`edge ${i + 1} is not a number`);
    } else {
      edges.push(v);
    }
  });
  if (raw.length < 2) {
    errors.push("need at least two edges");
  }
  if (errors.length === 0) {
    for (let i = 1; i < edges.length; i++) {
      if (!(edges[i - 1] < edges[i])) {
        errors.push(`edges must be strictly increasing (edge ${i} >= edge ${i + 1})`);
        break;
      }
    }
  }
  return { ok: errors.length === 0, edges: errors.length === 0 ? edges : [], errors };
}

export function canSubmit(v: EdgeValidation): boolean {
  return v.ok;
}

// number -> string without precision loss: String() is shortest-round-trip
export function prefillFromAnalysis(analysis: Analysis): string[] {
  if (analysis.bins.edges === null) return [];
  return analysis.bins.edges.map((e) => String(e));
}

export function explicitBinRule(edges: number[]): BinRuleBody {
  return { kind: "explicit_edges", edges };
}

// comparisons the service will report for k groups: k choose 2
export function expectedPairCount(groupCount: number): number {
  return (groupCount * (groupCount - 1)) / 2;
}

export function groupCountForEdges(edges: readonly number[]): number {
  return Math.max(edges.length - 1, 0);
}

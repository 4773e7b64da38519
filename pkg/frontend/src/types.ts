// Wire types for the /v1 JSON API. Field names mirror the server payloads
// exactly; nothing here is computed client-side.

export type DatasetKind = "dem" | "soil" | "boundary" | "yield";

export interface DatasetHandle {
  id: string;
  kind: DatasetKind;
  name: string;
  sha256: string;
  size: number;
  summary: Record<string, unknown>;
  created_at: number;
}

export interface GridMeta {
  ncols: number;
  nrows: number;
  xllcorner: number;
  yllcorner: number;
  cell_size: number;
  row_order: "south-to-north";
}

export interface GridPayload {
  id: string;
  meta: GridMeta;
  // row-major, row 0 southernmost; null marks nodata
  values: (number | null)[][];
}

export interface BinsSection {
  kind: "central_tendency" | "explicit_edges" | "categorical";
  edges: number[] | null;
  labels: string[];
}

export interface BoxSection {
  n: number;
  mean: number;
  median: number;
  q1: number;
  q3: number;
  iqr: number;
  whisker_low: number;
  whisker_high: number;
  outliers: number[];
}

export interface GroupRow {
  label: string;
  n: number;
  mean: number;
  variance: number | null;
  box: BoxSection;
}

export interface AnovaSection {
  ssb: number;
  ssw: number;
  sst: number;
  df_between: number;
  df_within: number;
  msb: number;
  msw: number;
  f: number;
  p_value: number;
  r_squared: number;
}

export interface TukeyPair {
  group1: string;
  group2: string;
  mean_diff: number;
  se: number;
  q_stat: number;
  p_adj: number;
  ci_low: number;
  ci_high: number;
  reject: boolean;
}

export interface TukeySection {
  fwer: number;
  q_critical: number;
  se_convention: string;
  pairs: TukeyPair[];
}

export interface Analysis {
  feature: string;
  season: string;
  bins: BinsSection;
  groups: GroupRow[];
  anova: AnovaSection;
  tukey: TukeySection | null;
  warnings: string[];
}

export interface Report {
  analyses: Analysis[];
  provenance: {
    config: AnalysisConfigBody;
    fused_table_sha256: string;
    tool_version: string;
  };
  warnings: string[];
}

export interface BinRuleBody {
  kind: "central_tendency" | "explicit_edges";
  edges?: number[];
}

export interface AnalysisConfigBody {
  grouping_features: string[];
  fwer?: number;
  bins?: Record<string, BinRuleBody>;
  seasons?: string[] | null;
  resolution_factor?: number;
  tukey_se_convention?: string;
}

export type JobState = "pending" | "running" | "done" | "failed";

export interface JobEnvelope {
  id: string;
  state: JobState;
  config: AnalysisConfigBody;
  datasets: { dem: string; soil: string; boundary: string; yield: string[] };
  error: string | null;
  submitted_at: number;
  finished_at: number | null;
  grids: Record<string, string>;
  report: Report | null;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  detail: unknown;
}

export interface BlocksFeature {
  type: "Feature";
  properties: { feature: string; group_label: string; cell_count: number };
  geometry:
    | { type: "Polygon"; coordinates: number[][][] }
    | { type: "MultiPolygon"; coordinates: number[][][][] };
}

export interface BlocksCollection {
  type: "FeatureCollection";
  features: BlocksFeature[];
}

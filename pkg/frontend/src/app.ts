// Page wiring. All statistics shown here come straight from the report; the
// browser's job is uploads, config assembly, polling, and drawing.

import { ApiError, Client } from "./api.js";
import { aspectArrows } from "./arrows.js";
import {
  canSubmit,
  expectedPairCount,
  explicitBinRule,
  groupCountForEdges,
  prefillFromAnalysis,
  validateEdges,
} from "./bins.js";
import { DEFAULT_BINS, rasterize } from "./grayscale.js";
import {
  renderAnovaTable,
  renderGroupsTable,
  renderSignificanceTable,
  SortKey,
} from "./sigtable.js";
import {
  Analysis,
  AnalysisConfigBody,
  BlocksCollection,
  DatasetHandle,
  DatasetKind,
  GridMeta,
  GridPayload,
  JobEnvelope,
} from "./types.js";

const client = new Client("");

const FEATURES: { name: string; label: string; continuous: boolean }[] = [
  { name: "elevation", label: "elevation", continuous: true },
  { name: "slope", label: "slope", continuous: true },
  { name: "texture", label: "soil texture", continuous: false },
  { name: "parent_material", label: "parent material", continuous: false },
  { name: "drainage_class", label: "drainage class", continuous: false },
  { name: "component_name", label: "soil component", continuous: false },
];

// minimal geometry shape shared by soil uploads and blocks
interface GeoFeature {
  geometry:
    | { type: "Polygon"; coordinates: number[][][] }
    | { type: "MultiPolygon"; coordinates: number[][][][] };
}

const state = {
  datasets: {
    dem: null as DatasetHandle | null,
    soil: null as DatasetHandle | null,
    boundary: null as DatasetHandle | null,
    yield: [] as DatasetHandle[],
  },
  // kept from the upload so the map can outline soil polygons; the service
  // has no raw-content endpoint and the overlay only needs what the user
  // already picked
  soilGeo: null as GeoFeature[] | null,
  runCount: 0,
};

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function toast(message: string, isError = true) {
  const el = document.createElement("div");
  el.className = isError ? "toast toast-error" : "toast";
  el.textContent = message;
  $("toasts").appendChild(el);
  setTimeout(() => el.remove(), 8000);
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    const detail = err.detail == null ? "" : ` (${JSON.stringify(err.detail)})`;
    return `${err.code}: ${err.message}${detail}`;
  }
  return String(err);
}

// -- uploads ----------------------------------------------------------------

function datasetLine(ds: DatasetHandle): string {
  return `${ds.name} · ${ds.size} bytes · ${ds.sha256.slice(0, 10)}`;
}

function wireUpload(kind: DatasetKind) {
  const input = $(`upload-${kind}`) as HTMLInputElement;
  const status = $(`status-${kind}`);
  input.addEventListener("change", async () => {
    const files = Array.from(input.files ?? []);
    if (files.length === 0) return;
    try {
      if (kind === "yield") {
        state.datasets.yield = [];
        for (const f of files) {
          state.datasets.yield.push(await client.uploadDataset("yield", f, f.name));
        }
        status.textContent = state.datasets.yield.map(datasetLine).join("; ");
      } else {
        const ds = await client.uploadDataset(kind, files[0], files[0].name);
        state.datasets[kind] = ds;
        status.textContent = datasetLine(ds);
        if (kind === "soil") {
          try {
            const parsed = JSON.parse(await files[0].text());
            state.soilGeo = (parsed.features ?? []) as GeoFeature[];
          } catch {
            state.soilGeo = null; // server accepted it; overlay is best-effort
          }
        }
      }
      refreshRunGate();
    } catch (err) {
      status.textContent = "upload failed";
      toast(describeError(err));
    }
  });
}

// -- config assembly ---------------------------------------------------------

interface BinEditor {
  feature: string;
  input: HTMLInputElement;
  note: HTMLElement;
}

const binEditors: BinEditor[] = [];

function buildConfigPanel() {
  const featureBox = $("features");
  for (const f of FEATURES) {
    const label = document.createElement("label");
    const cb = document.createElement("input");
    cb.type = "checkbox";
    cb.value = f.name;
    cb.id = `feature-${f.name}`;
    if (f.name === "elevation") cb.checked = true;
    cb.addEventListener("change", refreshRunGate);
    label.appendChild(cb);
    label.appendChild(document.createTextNode(` ${f.label}`));
    featureBox.appendChild(label);
  }

  const binBox = $("bin-editors");
  for (const f of FEATURES.filter((f) => f.continuous)) {
    const row = document.createElement("div");
    row.className = "bin-row";
    const label = document.createElement("label");
    label.textContent = `${f.label} edges`;
    const input = document.createElement("input");
    input.type = "text";
    input.placeholder = "blank = automatic bins";
    input.addEventListener("input", refreshRunGate);
    const note = document.createElement("span");
    note.className = "bin-note";
    row.append(label, input, note);
    binBox.appendChild(row);
    binEditors.push({ feature: f.name, input, note });
  }
}

function selectedFeatures(): string[] {
  return FEATURES.filter(
    (f) => ($(`feature-${f.name}`) as HTMLInputElement).checked,
  ).map((f) => f.name);
}

function parseEdgeBuffer(input: HTMLInputElement): string[] {
  return input.value
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
}

// validates every non-empty bin editor; returns null when something blocks
// submission (the note elements carry the reason)
function collectBinRules(): Record<string, { kind: string; edges?: number[] }> | null {
  const rules: Record<string, { kind: string; edges?: number[] }> = {};
  let blocked = false;
  for (const editor of binEditors) {
    const parts = parseEdgeBuffer(editor.input);
    if (parts.length === 0) {
      editor.note.textContent = "";
      editor.note.classList.remove("invalid");
      continue;
    }
    const v = validateEdges(parts);
    if (!canSubmit(v)) {
      editor.note.textContent = v.errors.join("; ");
      editor.note.classList.add("invalid");
      blocked = true;
      continue;
    }
    const k = groupCountForEdges(v.edges);
    editor.note.textContent = `${k} bins, ${expectedPairCount(k)} pairwise comparisons`;
    editor.note.classList.remove("invalid");
    rules[editor.feature] = explicitBinRule(v.edges);
  }
  return blocked ? null : rules;
}

function buildConfig(): AnalysisConfigBody | null {
  const rules = collectBinRules();
  if (rules === null) return null;
  const fwer = Number(($("fwer") as HTMLInputElement).value);
  const config: AnalysisConfigBody = {
    grouping_features: selectedFeatures(),
    fwer: Number.isFinite(fwer) ? fwer : 0.01,
  };
  if (Object.keys(rules).length > 0) {
    config.bins = rules as AnalysisConfigBody["bins"];
  }
  const seasonsRaw = ($("seasons") as HTMLInputElement).value.trim();
  if (seasonsRaw.length > 0) {
    config.seasons = seasonsRaw.split(",").map((s) => s.trim()).filter(Boolean);
  }
  return config;
}

function refreshRunGate() {
  const haveData =
    state.datasets.dem !== null &&
    state.datasets.soil !== null &&
    state.datasets.boundary !== null &&
    state.datasets.yield.length > 0;
  const binsOk = collectBinRules() !== null;
  const button = $("run") as HTMLButtonElement;
  button.disabled = !haveData || !binsOk || selectedFeatures().length === 0;
}

// -- map drawing --------------------------------------------------------------

const CANVAS_MAX = 420;

function makeTransform(meta: GridMeta, canvas: HTMLCanvasElement) {
  const worldW = meta.ncols * meta.cell_size;
  const worldH = meta.nrows * meta.cell_size;
  const scale = Math.min(CANVAS_MAX / worldW, CANVAS_MAX / worldH);
  canvas.width = Math.max(1, Math.round(worldW * scale));
  canvas.height = Math.max(1, Math.round(worldH * scale));
  // screen y grows downward, world y grows northward
  return (x: number, y: number): [number, number] => [
    (x - meta.xllcorner) * scale,
    canvas.height - (y - meta.yllcorner) * scale,
  ];
}

function drawGrid(canvas: HTMLCanvasElement, grid: GridPayload, grayBins: number) {
  const ctx = canvas.getContext("2d")!;
  makeTransform(grid.meta, canvas);
  const raster = rasterize(grid, grayBins);
  const off = document.createElement("canvas");
  off.width = raster.width;
  off.height = raster.height;
  const offCtx = off.getContext("2d")!;
  const img = offCtx.createImageData(raster.width, raster.height);
  img.data.set(raster.data);
  offCtx.putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function drawArrows(canvas: HTMLCanvasElement, aspect: GridPayload) {
  const ctx = canvas.getContext("2d")!;
  const toScreen = makeTransformNoResize(aspect.meta, canvas);
  const len = Math.max(4, canvas.width / aspect.meta.ncols / 1.4);
  ctx.strokeStyle = "#d84315";
  ctx.lineWidth = 1.25;
  for (const a of aspectArrows(aspect)) {
    const [sx, sy] = toScreen(a.x, a.y);
    // dy flips because screen y points south
    const tipX = sx + a.dx * len;
    const tipY = sy - a.dy * len;
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(tipX, tipY);
    const angle = Math.atan2(tipY - sy, tipX - sx);
    for (const side of [-1, 1]) {
      ctx.moveTo(tipX, tipY);
      ctx.lineTo(
        tipX - (len / 3) * Math.cos(angle + (side * Math.PI) / 7),
        tipY - (len / 3) * Math.sin(angle + (side * Math.PI) / 7),
      );
    }
    ctx.stroke();
  }
}

function makeTransformNoResize(meta: GridMeta, canvas: HTMLCanvasElement) {
  const scale = canvas.width / (meta.ncols * meta.cell_size);
  return (x: number, y: number): [number, number] => [
    (x - meta.xllcorner) * scale,
    canvas.height - (y - meta.yllcorner) * scale,
  ];
}

function drawOutlines(canvas: HTMLCanvasElement, meta: GridMeta, features: GeoFeature[]) {
  const ctx = canvas.getContext("2d")!;
  const toScreen = makeTransformNoResize(meta, canvas);
  ctx.strokeStyle = "#424242";
  ctx.lineWidth = 1;
  ctx.setLineDash([4, 3]);
  for (const f of features) {
    const polygons =
      f.geometry.type === "Polygon" ? [f.geometry.coordinates] : f.geometry.coordinates;
    for (const rings of polygons) {
      for (const ring of rings) {
        ctx.beginPath();
        ring.forEach(([x, y], j) => {
          const [sx, sy] = toScreen(x, y);
          if (j === 0) ctx.moveTo(sx, sy);
          else ctx.lineTo(sx, sy);
        });
        ctx.closePath();
        ctx.stroke();
      }
    }
  }
  ctx.setLineDash([]);
}

const BLOCK_COLORS = ["#1565c0", "#2e7d32", "#ef6c00", "#6a1b9a", "#c62828", "#00838f"];

function drawBlocks(
  canvas: HTMLCanvasElement,
  meta: GridMeta,
  blocks: BlocksCollection,
  feature: string,
) {
  const ctx = canvas.getContext("2d")!;
  const toScreen = makeTransformNoResize(meta, canvas);
  const features = blocks.features.filter((f) => f.properties.feature === feature);
  features.forEach((f, i) => {
    const color = BLOCK_COLORS[i % BLOCK_COLORS.length];
    ctx.strokeStyle = color;
    ctx.fillStyle = color + "22";
    ctx.lineWidth = 1.5;
    const polygons =
      f.geometry.type === "Polygon" ? [f.geometry.coordinates] : f.geometry.coordinates;
    for (const rings of polygons) {
      ctx.beginPath();
      for (const ring of rings) {
        ring.forEach(([x, y], j) => {
          const [sx, sy] = toScreen(x, y);
          if (j === 0) ctx.moveTo(sx, sy);
          else ctx.lineTo(sx, sy);
        });
        ctx.closePath();
      }
      ctx.fill("evenodd");
      ctx.stroke();
    }
  });
}

// -- result cards -------------------------------------------------------------

interface ResultContext {
  job: JobEnvelope;
  blocks: BlocksCollection;
  gridCache: Map<string, GridPayload>;
}

async function fetchGrid(ctx: ResultContext, name: string): Promise<GridPayload> {
  const cached = ctx.gridCache.get(name);
  if (cached) return cached;
  const grid = await client.getGrid(ctx.job.grids[name]);
  ctx.gridCache.set(name, grid);
  return grid;
}

function analysisSection(analysis: Analysis): HTMLElement {
  const section = document.createElement("section");
  section.className = "analysis";
  const h = document.createElement("h4");
  h.textContent = `${analysis.feature} × ${analysis.season}`;
  section.appendChild(h);

  if (analysis.warnings.length > 0) {
    const ul = document.createElement("ul");
    ul.className = "warnings";
    for (const w of analysis.warnings) {
      const li = document.createElement("li");
      li.textContent = w;
      ul.appendChild(li);
    }
    section.appendChild(ul);
  }

  const anovaDiv = document.createElement("div");
  anovaDiv.innerHTML = renderAnovaTable(analysis);
  const groupsDiv = document.createElement("div");
  groupsDiv.innerHTML = renderGroupsTable(analysis);
  const sigDiv = document.createElement("div");
  let sortKey: SortKey = "p_adj";
  const renderSig = () => {
    sigDiv.innerHTML = renderSignificanceTable(analysis, sortKey);
  };
  renderSig();
  sigDiv.addEventListener("click", (ev) => {
    const th = (ev.target as HTMLElement).closest("th[data-sort]");
    if (!th) return;
    sortKey = th.getAttribute("data-sort") as SortKey;
    renderSig();
  });
  section.append(anovaDiv, groupsDiv, sigDiv);
  return section;
}

async function addResultCard(ctx: ResultContext) {
  state.runCount += 1;
  const card = document.createElement("article");
  card.className = "result";
  const report = ctx.job.report!;

  const head = document.createElement("h3");
  const features = (ctx.job.config.grouping_features ?? []).join(", ");
  head.textContent = `run ${state.runCount}: ${features} (fwer ${ctx.job.config.fwer})`;
  card.appendChild(head);

  // map controls
  const controls = document.createElement("div");
  controls.className = "map-controls";
  const layerSelect = document.createElement("select");
  for (const name of Object.keys(ctx.job.grids).sort()) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    layerSelect.appendChild(opt);
  }
  const binsInput = document.createElement("input");
  binsInput.type = "number";
  binsInput.min = "2";
  binsInput.max = "255";
  binsInput.value = String(DEFAULT_BINS);
  binsInput.title = "grayscale levels";
  const arrowToggle = document.createElement("input");
  arrowToggle.type = "checkbox";
  const arrowLabel = document.createElement("label");
  arrowLabel.append(arrowToggle, document.createTextNode(" aspect arrows"));
  const soil = state.soilGeo; // snapshot: older cards keep the soil they ran with
  const soilToggle = document.createElement("input");
  soilToggle.type = "checkbox";
  soilToggle.disabled = soil === null;
  const soilLabel = document.createElement("label");
  soilLabel.append(soilToggle, document.createTextNode(" soil outlines"));
  const blockSelect = document.createElement("select");
  const noneOpt = document.createElement("option");
  noneOpt.value = "";
  noneOpt.textContent = "no blocks";
  blockSelect.appendChild(noneOpt);
  const blockFeatures = [...new Set(ctx.blocks.features.map((f) => f.properties.feature))];
  for (const f of blockFeatures) {
    const opt = document.createElement("option");
    opt.value = f;
    opt.textContent = `${f} blocks`;
    blockSelect.appendChild(opt);
  }
  controls.append(layerSelect, binsInput, arrowLabel, soilLabel, blockSelect);
  card.appendChild(controls);

  const canvas = document.createElement("canvas");
  canvas.className = "map";
  card.appendChild(canvas);

  const redraw = async () => {
    try {
      const grid = await fetchGrid(ctx, layerSelect.value);
      const grayBins = Math.max(2, Math.round(Number(binsInput.value) || DEFAULT_BINS));
      drawGrid(canvas, grid, grayBins);
      if (arrowToggle.checked && ctx.job.grids["aspect"]) {
        drawArrows(canvas, await fetchGrid(ctx, "aspect"));
      }
      if (soilToggle.checked && soil) {
        drawOutlines(canvas, grid.meta, soil);
      }
      if (blockSelect.value) {
        drawBlocks(canvas, grid.meta, ctx.blocks, blockSelect.value);
      }
    } catch (err) {
      toast(describeError(err));
    }
  };
  layerSelect.addEventListener("change", redraw);
  binsInput.addEventListener("change", redraw);
  arrowToggle.addEventListener("change", redraw);
  soilToggle.addEventListener("change", redraw);
  blockSelect.addEventListener("change", redraw);
  await redraw();

  for (const analysis of report.analyses) {
    card.appendChild(analysisSection(analysis));
  }

  if (report.warnings.length > 0) {
    const ul = document.createElement("ul");
    ul.className = "warnings";
    for (const w of report.warnings) {
      const li = document.createElement("li");
      li.textContent = w;
      ul.appendChild(li);
    }
    card.appendChild(ul);
  }

  // newest first; older runs stay for side-by-side comparison
  $("results").prepend(card);
}

// seed the bin editors with the edges the server actually used, so the next
// submission starts from what the report echoed
function prefillBinEditors(report: { analyses: Analysis[] }) {
  for (const editor of binEditors) {
    const analysis = report.analyses.find(
      (a) => a.feature === editor.feature && a.bins.edges !== null,
    );
    if (analysis) {
      editor.input.value = prefillFromAnalysis(analysis).join(", ");
    }
  }
  refreshRunGate();
}

// -- run ----------------------------------------------------------------------

async function run() {
  const config = buildConfig();
  if (config === null) return;
  const button = $("run") as HTMLButtonElement;
  const status = $("run-status");
  button.disabled = true;
  try {
    const submitted = await client.submitAnalysis(config, {
      dem: state.datasets.dem!.id,
      soil: state.datasets.soil!.id,
      boundary: state.datasets.boundary!.id,
      yield: state.datasets.yield.map((d) => d.id),
    });
    status.textContent = `submitted ${submitted.id}`;
    const job = await client.pollAnalysis(submitted.id, {
      onTick: (j) => {
        status.textContent = `${j.id}: ${j.state}`;
      },
    });
    if (job.state === "failed") {
      status.textContent = "failed";
      toast(`analysis failed: ${job.error ?? "unknown error"}`);
      return;
    }
    status.textContent = "done";
    const blocks = await client.getBlocks(job.id);
    const ctx: ResultContext = { job, blocks, gridCache: new Map() };
    await addResultCard(ctx);
    prefillBinEditors(job.report!);
  } catch (err) {
    status.textContent = "error";
    toast(describeError(err));
  } finally {
    refreshRunGate();
  }
}

// -- boot ---------------------------------------------------------------------

export function boot() {
  buildConfigPanel();
  for (const kind of ["dem", "soil", "boundary", "yield"] as DatasetKind[]) {
    wireUpload(kind);
  }
  $("run").addEventListener("click", run);
  refreshRunGate();
  client
    .health()
    .then((h) => {
      $("health").textContent = `service ${h.version}`;
    })
    .catch(() => {
      $("health").textContent = "service unreachable";
    });
}

if (typeof document !== "undefined" && document.getElementById("run")) {
  boot();
}

import * as path from "path";
import { SchemaError } from "./errors";
import { Table, columnIndex, numericColumn, readTable, stringColumn } from "./csv";
import { gaussianKde, weightedHistogram } from "./kde";

export const FIGURE_KINDS = [
  "density-overlay",
  "p-scatter",
  "p-histogram",
  "mse-curves",
  "xi-densities",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export type SeriesKind = "line" | "scatter" | "histogram";

export interface Series {
  label: string;
  kind: SeriesKind;
  /** histogram: x holds bins+1 edges and y holds bins densities. */
  x: number[];
  y: number[];
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  xLim?: [number, number];
  yLim?: [number, number];
}

export interface FigureModel {
  kind: FigureKind;
  panels: Panel[];
}

/** The four headline pipelines drawn in the accept-count sweep figure. */
export const MSE_PIPELINES = [
  "rejection",
  "regression",
  "recal-rejection",
  "recal-regression",
] as const;

const P_BINS = 20;

function stem(file: string): string {
  return path.basename(file).replace(/\.csv$/i, "");
}

function requireInputs(kind: FigureKind, inputs: string[], count: number | "many"): void {
  if (inputs.length === 0) throw new SchemaError(`${kind}: no input CSVs given`);
  if (count !== "many" && inputs.length !== count) {
    throw new SchemaError(`${kind}: expected ${count} input CSV(s), got ${inputs.length}`);
  }
}

function weightsOf(table: Table): number[] {
  if (table.header.includes("weight")) return numericColumn(table, "weight");
  return new Array<number>(table.rows.length).fill(1);
}

/** Columns that define margins: everything except the weight column. */
function marginColumns(table: Table): string[] {
  const margins = table.header.filter((h) => h !== "weight");
  if (margins.length === 0) {
    throw new SchemaError(`${table.path}: no margin columns besides "weight"`);
  }
  return margins;
}

function densityOverlay(inputs: string[]): FigureModel {
  requireInputs("density-overlay", inputs, "many");
  const tables = inputs.map(readTable);
  const margins = marginColumns(tables[0]!);
  for (const table of tables.slice(1)) {
    for (const margin of margins) columnIndex(table, margin);
    for (const extra of marginColumns(table)) {
      if (!margins.includes(extra)) {
        throw new SchemaError(
          `${table.path}: column "${extra}" is absent from ${tables[0]!.path}`,
        );
      }
    }
  }
  const panels = margins.map((margin): Panel => {
    const series = tables.map((table): Series => {
      const kde = gaussianKde(numericColumn(table, margin), weightsOf(table));
      return { label: stem(table.path), kind: "line", x: kde.x, y: kde.y };
    });
    return { title: margin, xLabel: margin, yLabel: "density", series };
  });
  return { kind: "density-overlay", panels };
}

function pColumns(table: Table): string[] {
  const cols = table.header.filter((h) => h.startsWith("p_") && !h.startsWith("p_raw_"));
  if (cols.length === 0) {
    throw new SchemaError(
      `${table.path}: no coverage-position columns ("p_<name>") in header ${table.header.join(",")}`,
    );
  }
  return cols;
}

function pScatter(inputs: string[]): FigureModel {
  requireInputs("p-scatter", inputs, 1);
  const table = readTable(inputs[0]!);
  const cols = pColumns(table);
  if (cols.length < 2) {
    throw new SchemaError(`${table.path}: scatter needs two position columns, found "${cols[0]}"`);
  }
  const [cx, cy] = [cols[0]!, cols[1]!];
  const series: Series = {
    label: `(${cx}, ${cy})`,
    kind: "scatter",
    x: numericColumn(table, cx),
    y: numericColumn(table, cy),
  };
  return {
    kind: "p-scatter",
    panels: [
      {
        title: "coverage positions",
        xLabel: cx,
        yLabel: cy,
        series: [series],
        xLim: [0, 1],
        yLim: [0, 1],
      },
    ],
  };
}

function pHistogram(inputs: string[]): FigureModel {
  requireInputs("p-histogram", inputs, 1);
  const table = readTable(inputs[0]!);
  const weights = weightsOf(table);
  const panels = pColumns(table).map((col): Panel => {
    const hist = weightedHistogram(numericColumn(table, col), weights, P_BINS, 0, 1);
    return {
      title: col,
      xLabel: col,
      yLabel: "density",
      series: [{ label: col, kind: "histogram", x: hist.edges, y: hist.density }],
      xLim: [0, 1],
    };
  });
  return { kind: "p-histogram", panels };
}

function mseCurves(inputs: string[]): FigureModel {
  requireInputs("mse-curves", inputs, 1);
  const table = readTable(inputs[0]!);
  const pipelines = stringColumn(table, "pipeline");
  const counts = numericColumn(table, "accept_count");
  const logMse = numericColumn(table, "log10_mse");
  const series = MSE_PIPELINES.map((pipeline): Series => {
    const rows = pipelines
      .map((p, i) => ({ p, i }))
      .filter(({ p }) => p === pipeline)
      .map(({ i }) => ({ m: counts[i]!, v: logMse[i]! }))
      .sort((a, b) => a.m - b.m);
    if (rows.length === 0) {
      throw new SchemaError(
        `${table.path}: column "pipeline" has no rows for "${pipeline}"`,
      );
    }
    return {
      label: pipeline,
      kind: "line",
      x: rows.map((r) => Math.log10(r.m)),
      y: rows.map((r) => r.v),
    };
  });
  return {
    kind: "mse-curves",
    panels: [
      {
        title: "error vs acceptance count",
        xLabel: "log10(accept count)",
        yLabel: "log10(MSE)",
        series,
      },
    ],
  };
}

function xiDensities(inputs: string[]): FigureModel {
  requireInputs("xi-densities", inputs, "many");
  const series = inputs.map((input): Series => {
    const table = readTable(input);
    const kde = gaussianKde(numericColumn(table, "xi"), weightsOf(table));
    return { label: stem(input), kind: "line", x: kde.x, y: kde.y };
  });
  return {
    kind: "xi-densities",
    panels: [{ title: "xi posteriors", xLabel: "xi", yLabel: "density", series }],
  };
}

/** Assemble the drawable model for one figure job from its input CSVs. */
export function buildFigure(kind: FigureKind, inputs: string[]): FigureModel {
  switch (kind) {
    case "density-overlay":
      return densityOverlay(inputs);
    case "p-scatter":
      return pScatter(inputs);
    case "p-histogram":
      return pHistogram(inputs);
    case "mse-curves":
      return mseCurves(inputs);
    case "xi-densities":
      return xiDensities(inputs);
    default: {
      const never: never = kind;
      throw new SchemaError(`unknown figure kind ${String(never)}`);
    }
  }
}

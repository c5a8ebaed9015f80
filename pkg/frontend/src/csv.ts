import { readFileSync } from "fs";
import Papa from "papaparse";
import { SchemaError } from "./errors";

export interface Table {
  path: string;
  header: string[];
  rows: string[][];
}

/** Parse a CSV file into header plus string rows, rejecting ragged input. */
export function readTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`${path}: cannot read input: ${(err as Error).message}`);
  }
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    const where = first.row === undefined ? "" : ` at row ${first.row + 1}`;
    throw new SchemaError(`${path}: malformed CSV${where}: ${first.message}`);
  }
  const data = parsed.data;
  if (data.length === 0) {
    throw new SchemaError(`${path}: empty input, expected a header row`);
  }
  const header = data[0]!.map((h) => h.trim());
  const rows = data.slice(1);
  if (rows.length === 0) {
    throw new SchemaError(`${path}: no data rows under header "${header.join(",")}"`);
  }
  rows.forEach((row, i) => {
    if (row.length !== header.length) {
      throw new SchemaError(
        `${path}: row ${i + 2} has ${row.length} cells, header has ${header.length}`,
      );
    }
  });
  return { path, header, rows };
}

/** Index of a required column, by exact name. */
export function columnIndex(table: Table, name: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `${table.path}: missing required column "${name}" (found: ${table.header.join(", ")})`,
    );
  }
  return idx;
}

/** A required column coerced to finite numbers. */
export function numericColumn(table: Table, name: string): number[] {
  const idx = columnIndex(table, name);
  return table.rows.map((row, i) => {
    const cell = row[idx]!;
    const value = Number(cell);
    if (cell.trim() === "" || !Number.isFinite(value)) {
      throw new SchemaError(
        `${table.path}: column "${name}", row ${i + 2}: "${cell}" is not a finite number`,
      );
    }
    return value;
  });
}

/** A required column as trimmed strings. */
export function stringColumn(table: Table, name: string): string[] {
  const idx = columnIndex(table, name);
  return table.rows.map((row) => row[idx]!.trim());
}

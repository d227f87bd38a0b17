// Parser for the versioned CSV contract emitted by the solver CLI.
//
// Every file starts with "# schema=<name>/v1, config=<hash>", then optional
// "# key=value" comment lines, a header row, and numeric rows.

import { readFileSync } from "node:fs";

export interface CsvDocument {
  schema: string;
  config: string;
  meta: Record<string, string>;
  columns: string[];
  rows: number[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): CsvDocument {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0 || !lines[0].startsWith("# schema=")) {
    throw new SchemaError("missing schema header line");
  }
  const m = lines[0].match(/^# schema=([\w-]+\/v\d+), config=([0-9a-f]+)/);
  if (!m) {
    throw new SchemaError(`malformed schema line: ${lines[0]}`);
  }
  const meta: Record<string, string> = {};
  let i = 1;
  for (; i < lines.length && lines[i].startsWith("#"); i++) {
    const mm = lines[i].match(/^# ([\w]+)=(.*)$/);
    if (mm) {
      meta[mm[1]] = mm[2];
    }
  }
  if (i >= lines.length) {
    throw new SchemaError("missing column header row");
  }
  const columns = lines[i].split(",");
  const rows: number[][] = [];
  for (i += 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new SchemaError(
        `row has ${parts.length} fields, expected ${columns.length}: ${lines[i]}`
      );
    }
    rows.push(parts.map(Number));
  }
  return { schema: m[1], config: m[2], meta, columns, rows };
}

export function loadCsv(path: string): CsvDocument {
  return parseCsv(readFileSync(path, "utf-8"));
}

export function column(doc: CsvDocument, name: string): number[] {
  const idx = doc.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`column ${name} not present in ${doc.schema}`);
  }
  return doc.rows.map((r) => r[idx]);
}

// Summary rows keep their string fields (quantity, model).
export interface SummaryRow {
  quantity: string;
  model: string;
  C: number;
  c: number;
  residual: number;
}

export function parseSummary(text: string): SummaryRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (!lines[0].startsWith("# schema=summary/v1")) {
    throw new SchemaError("not a summary/v1 document");
  }
  const body = lines.filter((l) => !l.startsWith("#"));
  const cols = body[0].split(",");
  const get = (parts: string[], name: string) => parts[cols.indexOf(name)];
  return body.slice(1).map((line) => {
    const parts = line.split(",");
    return {
      quantity: get(parts, "quantity"),
      model: get(parts, "model"),
      C: Number(get(parts, "C")),
      c: Number(get(parts, "c")),
      residual: Number(get(parts, "residual")),
    };
  });
}

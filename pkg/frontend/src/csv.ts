/**
 * Reader for the solver's convergence/weak-error CSVs.
 *
 * Layout: `#`-prefixed provenance lines, a header row
 * `param_kind,param_value,error,std_error,rel_error,ref_norm`, data rows,
 * and optionally one `slope,...` footer row with the fitted rate.
 * This module never recomputes any numerics; it only reads them.
 */

export interface ErrorRow {
  paramKind: string;
  paramValue: number;
  error: number;
  stdError: number;
  relError: number;
  refNorm: number;
}

export interface SlopeFooter {
  slope: number;
  intercept: number;
  residual: number;
}

export interface ConvergenceTable {
  provenance: Record<string, string>;
  rows: ErrorRow[];
  slope?: SlopeFooter;
}

export const REQUIRED_COLUMNS = [
  "param_kind",
  "param_value",
  "error",
  "std_error",
  "rel_error",
  "ref_norm",
] as const;

export function parseConvergenceCsv(text: string): ConvergenceTable {
  const provenance: Record<string, string> = {};
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);

  let headerIndex = -1;
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line.startsWith("#")) {
      const body = line.slice(1).trim();
      const eq = body.indexOf("=");
      if (eq > 0) provenance[body.slice(0, eq)] = body.slice(eq + 1);
      continue;
    }
    headerIndex = i;
    break;
  }
  if (headerIndex < 0) throw new Error("CSV has no header row");

  const header = lines[headerIndex].split(",").map((c) => c.trim());
  const missing = REQUIRED_COLUMNS.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new Error(`CSV is missing required columns: ${missing.join(", ")}`);
  }
  const col = (name: string) => header.indexOf(name);

  const rows: ErrorRow[] = [];
  let slope: SlopeFooter | undefined;
  for (const line of lines.slice(headerIndex + 1)) {
    const cells = line.split(",");
    const kind = cells[col("param_kind")];
    if (kind === "slope") {
      // footer row: slope,<slope>,<intercept>,<rms residual>,,
      slope = {
        slope: Number(cells[col("param_value")]),
        intercept: Number(cells[col("error")]),
        residual: Number(cells[col("std_error")]),
      };
      continue;
    }
    rows.push({
      paramKind: kind,
      paramValue: Number(cells[col("param_value")]),
      error: Number(cells[col("error")]),
      stdError: Number(cells[col("std_error")]),
      relError: Number(cells[col("rel_error")]),
      refNorm: Number(cells[col("ref_norm")]),
    });
  }
  return { provenance, rows, slope };
}

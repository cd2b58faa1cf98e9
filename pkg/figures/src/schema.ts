/** CSV loading with strict schema validation: a recipe fails loudly on a
 * missing column or empty data rather than mis-plotting silently. */

import { readFileSync } from "node:fs";
import Papa from "papaparse";
import { z } from "zod";

const num = z.coerce.number().refine(Number.isFinite, "not a finite number");

export const SummaryRow = z.object({
  experiment: z.enum(["forward", "cyclic", "linear_cycle"]),
  protocol: z.string().min(1),
  tau_or_v: num,
  beta_f: num,
  cd_order: z.coerce.number().int(),
  wait_kind: z.string(),
  n: z.coerce.number().int().positive(),
  sigma2: num,
  sigma2_err: num,
});
export type SummaryRow = z.infer<typeof SummaryRow>;

export const SUMMARY_COLUMNS = [
  "experiment", "protocol", "tau_or_v", "beta_f", "cd_order",
  "wait_kind", "n", "sigma2", "sigma2_err",
] as const;

export const PredictionRow = z.object({
  model: z.string().min(1),
  beta: num,
  sigma2_sw: num,
});
export type PredictionRow = z.infer<typeof PredictionRow>;

export class SchemaError extends Error {}

function parseCsv(path: string): Record<string, string>[] {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: CSV parse error: ${parsed.errors[0].message}`);
  }
  return parsed.data;
}

function validateColumns(path: string, rows: Record<string, string>[],
                         required: readonly string[]): void {
  if (rows.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  const present = new Set(Object.keys(rows[0]));
  for (const col of required) {
    if (!present.has(col)) {
      throw new SchemaError(`${path}: missing required column '${col}'`);
    }
  }
}

export function loadSummary(path: string): SummaryRow[] {
  const raw = parseCsv(path);
  validateColumns(path, raw, SUMMARY_COLUMNS);
  return raw.map((row, i) => {
    const check = SummaryRow.safeParse(row);
    if (!check.success) {
      throw new SchemaError(`${path} row ${i + 1}: ${check.error.issues[0].message}`);
    }
    return check.data;
  });
}

export function loadPredictions(path: string): PredictionRow[] {
  const raw = parseCsv(path);
  validateColumns(path, raw, ["model", "beta", "sigma2_sw"]);
  return raw.map((row, i) => {
    const check = PredictionRow.safeParse(row);
    if (!check.success) {
      throw new SchemaError(`${path} row ${i + 1}: ${check.error.issues[0].message}`);
    }
    return check.data;
  });
}

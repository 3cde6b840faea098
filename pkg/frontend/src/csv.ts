import Papa from "papaparse";

export type Row = Record<string, string>;

/** Parse a CSV string with a header row into string-valued records.
 *  Throws if the input has no header or no data rows. */
export function parseCsv(text: string): Row[] {
  const res = Papa.parse<Row>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (res.errors.length > 0) {
    const e = res.errors[0];
    throw new Error(`CSV parse error at row ${e.row}: ${e.message}`);
  }
  const rows = res.data;
  if (rows.length === 0) {
    throw new Error("CSV has no data rows");
  }
  return rows;
}

/** Numeric field access with a clear error on junk values. */
export function num(row: Row, field: string): number {
  const raw = row[field];
  if (raw === undefined) {
    throw new Error(`missing column '${field}'`);
  }
  const v = Number(raw);
  if (!Number.isFinite(v)) {
    throw new Error(`non-finite value '${raw}' in column '${field}'`);
  }
  return v;
}

/**
 * Readers for the planner's run artifacts.
 *
 * CSV dialect: comma separator, '.' decimal, one header row, LF endings,
 * finite numeric values. Parse failures name the file and 1-based line.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export interface Table {
  header: string[];
  rows: number[][];
}

export class CsvError extends Error {
  constructor(file: string, line: number, message: string) {
    super(`${file}:${line}: ${message}`);
    this.name = 'CsvError';
  }
}

export function parseCsv(text: string, file: string): Table {
  const lines = text.split('\n');
  if (lines.length > 0 && lines[lines.length - 1] === '') {
    lines.pop();
  }
  if (lines.length < 2) {
    throw new CsvError(file, 1, 'expected a header row and at least one data row');
  }
  const header = lines[0].split(',');
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(',');
    if (cells.length !== header.length) {
      throw new CsvError(file, i + 1, `expected ${header.length} columns, found ${cells.length}`);
    }
    const row = cells.map((cell) => Number(cell));
    const bad = row.findIndex((v) => !Number.isFinite(v));
    if (bad >= 0) {
      throw new CsvError(file, i + 1, `column ${header[bad]} is not a finite number: ${cells[bad]}`);
    }
    rows.push(row);
  }
  return { header, rows };
}

export function readCsv(file: string): Table {
  let text: string;
  try {
    text = fs.readFileSync(file, 'utf8');
  } catch (err) {
    throw new CsvError(file, 0, `cannot read file: ${(err as Error).message}`);
  }
  return parseCsv(text, file);
}

export function column(table: Table, name: string, file: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new CsvError(file, 1, `missing column ${name}; have ${table.header.join(',')}`);
  }
  return table.rows.map((r) => r[idx]);
}

export interface BarrierEcho {
  form: string;
  u_max: Record<string, number>;
}

export interface Summary {
  name: string;
  system: { name: string; n: number; m: number };
  lambda: number;
  converged: boolean;
  config: {
    barrier: BarrierEcho | null;
    augment: { u_i: number[]; u_f: number[] } | null;
    [key: string]: unknown;
  };
  [key: string]: unknown;
}

export interface RunDir {
  dir: string;
  flowHistory: Table;
  pathFinal: Table;
  controls: Table;
  integrated: Table;
  snapshots: { s: number; table: Table }[];
  summary: Summary | null;
}

/** Load a run directory; snapshots and summary.json are optional. */
export function loadRunDir(dir: string): RunDir {
  const flowHistory = readCsv(path.join(dir, 'flow_history.csv'));
  const pathFinal = readCsv(path.join(dir, 'path_final.csv'));
  const controls = readCsv(path.join(dir, 'controls.csv'));
  const integrated = readCsv(path.join(dir, 'integrated.csv'));

  const snapshots: { s: number; table: Table }[] = [];
  const snapDir = path.join(dir, 'snapshots');
  if (fs.existsSync(snapDir)) {
    for (const name of fs.readdirSync(snapDir).sort()) {
      const match = /^s_(.+)\.csv$/.exec(name);
      if (!match) continue;
      const s = Number(match[1]);
      if (!Number.isFinite(s)) continue;
      snapshots.push({ s, table: readCsv(path.join(snapDir, name)) });
    }
    snapshots.sort((a, b) => a.s - b.s);
  }

  let summary: Summary | null = null;
  const summaryPath = path.join(dir, 'summary.json');
  if (fs.existsSync(summaryPath)) {
    summary = JSON.parse(fs.readFileSync(summaryPath, 'utf8')) as Summary;
  }
  return { dir, flowHistory, pathFinal, controls, integrated, snapshots, summary };
}

#!/usr/bin/env node
/**
 * Render run-directory artifacts to SVG.
 *
 *   plotview <run_dir> <state3d|planar|controls|convergence|all> [-o out]
 *
 * With a single kind, -o names the output file (default
 * <run_dir>/fig_<kind>.svg). With "all", -o names a directory.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { CsvError, loadRunDir } from './csv.js';
import { FIGURE_KINDS, FigureKind, render } from './figures.js';

export function main(argv: string[]): number {
  const args = argv.slice();
  let out: string | null = null;
  const oIdx = args.findIndex((a) => a === '-o' || a === '--output');
  if (oIdx >= 0) {
    out = args[oIdx + 1] ?? null;
    args.splice(oIdx, 2);
  }
  const [runDir, kindArg] = args;
  if (!runDir || !kindArg) {
    console.error('usage: plotview <run_dir> <state3d|planar|controls|convergence|all> [-o out]');
    return 2;
  }
  const kinds: FigureKind[] =
    kindArg === 'all' ? FIGURE_KINDS : [kindArg as FigureKind];
  for (const k of kinds) {
    if (!FIGURE_KINDS.includes(k)) {
      console.error(`unknown figure kind ${k}; valid: ${FIGURE_KINDS.join(', ')}, all`);
      return 2;
    }
  }
  let run;
  try {
    run = loadRunDir(runDir);
  } catch (err) {
    if (err instanceof CsvError) {
      console.error(err.message);
      return 1;
    }
    throw err;
  }
  for (const kind of kinds) {
    const fig = render(run, kind);
    const target =
      kinds.length === 1 && out
        ? out
        : path.join(out ?? runDir, `fig_${kind}.svg`);
    fs.mkdirSync(path.dirname(target), { recursive: true });
    fs.writeFileSync(target, fig.svg);
    const bounds = fig.boundChecks
      .map((b) => ` ${b.channel}: max|u|=${b.maxAbs.toFixed(4)} vs bound ${b.bound.toFixed(4)}`)
      .join(';');
    console.log(`${kind} -> ${target}${bounds}`);
    for (const b of fig.boundChecks) {
      if (b.maxAbs >= b.bound) {
        console.error(`WARNING: ${b.channel} crosses its bound in the data`);
      }
    }
  }
  return 0;
}

const isMain = process.argv[1] && path.resolve(process.argv[1]) === path.resolve(new URL(import.meta.url).pathname);
if (isMain) {
  process.exit(main(process.argv.slice(2)));
}

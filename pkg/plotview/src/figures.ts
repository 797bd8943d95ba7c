/**
 * The four figure kinds rendered from a run directory.
 *
 * Everything here is read-only presentation of the CSV artifacts: any
 * discrepancy between the plotted curves is evidence about the planner,
 * not about this renderer.
 */

import { RunDir, Table, column } from './csv.js';
import { Scene, blueShade, extentOf, mergeExtents } from './svg.js';

export type FigureKind = 'state3d' | 'planar' | 'controls' | 'convergence';

export const FIGURE_KINDS: FigureKind[] = ['state3d', 'planar', 'controls', 'convergence'];

export interface Figure {
  kind: FigureKind;
  svg: string;
  /** per-channel [max |value|, bound] pairs for bounded channels (controls only) */
  boundChecks: { channel: string; maxAbs: number; bound: number }[];
}

function stateColumns(table: Table): number {
  return table.header.filter((h) => /^x(tilde)?_\d+$/.test(h)).length;
}

/** Oblique (cavalier) projection of the first three state coordinates. */
function project3d(x1: number, x2: number, x3: number, scale3: number): [number, number] {
  const k = 0.45;
  return [x1 + k * Math.SQRT1_2 * scale3 * x3, x2 + k * Math.SQRT1_2 * scale3 * x3];
}

function pathPoints(table: Table, file: string): { t: number[]; cols: number[][] } {
  const t = column(table, 't', file);
  const n = stateColumns(table);
  const prefix = table.header.includes('x_1') ? 'x_' : 'xtilde_';
  const cols: number[][] = [];
  for (let i = 1; i <= n; i++) {
    cols.push(column(table, `${prefix}${i}`, file));
  }
  return { t, cols };
}

export function renderState3d(run: RunDir): Figure {
  const final = pathPoints(run.pathFinal, 'path_final.csv');
  const n = final.cols.length;
  const third = n >= 3 ? final.cols[2] : final.cols[0].map(() => 0);
  const spanXY = Math.max(
    Math.max(...final.cols[0]) - Math.min(...final.cols[0]),
    Math.max(...final.cols[1]) - Math.min(...final.cols[1]),
    1e-9,
  );
  const span3 = Math.max(Math.max(...third) - Math.min(...third), 1e-9);
  const scale3 = spanXY / span3;

  const curves: { u: number[]; v: number[]; stroke: string; width: number; opacity?: number }[] = [];
  const snaps = run.snapshots;
  snaps.forEach((snap, idx) => {
    const pts = pathPoints(snap.table, `snapshots s=${snap.s}`);
    const t3 = pts.cols.length >= 3 ? pts.cols[2] : pts.cols[0].map(() => 0);
    const u = pts.cols[0].map((x, i) => project3d(x, pts.cols[1][i], t3[i], scale3)[0]);
    const v = pts.cols[0].map((x, i) => project3d(x, pts.cols[1][i], t3[i], scale3)[1]);
    curves.push({ u, v, stroke: blueShade(snaps.length > 1 ? idx / (snaps.length - 1) : 1), width: 1.0, opacity: 0.85 });
  });
  const uF = final.cols[0].map((x, i) => project3d(x, final.cols[1][i], third[i], scale3)[0]);
  const vF = final.cols[0].map((x, i) => project3d(x, final.cols[1][i], third[i], scale3)[1]);
  curves.push({ u: uF, v: vF, stroke: '#000', width: 2.0 });

  let ext = extentOf(curves[0].u, curves[0].v);
  for (const c of curves) ext = mergeExtents(ext, extentOf(c.u, c.v));
  const scene = new Scene(560, 480, ext);
  for (const c of curves) scene.polyline(c.u, c.v, c.stroke, { width: c.width, opacity: c.opacity });
  scene.circle(uF[0], vF[0], 4, '#2a7');
  scene.circle(uF[uF.length - 1], vF[vF.length - 1], 4, '#d33');
  scene.axes('x_1 (+ x_3 depth)', 'x_2 (+ x_3 depth)', `state space: sketch to final path (${run.snapshots.length} snapshots)`);
  return { kind: 'state3d', svg: scene.render(), boundChecks: [] };
}

export function renderPlanar(run: RunDir): Figure {
  const final = pathPoints(run.pathFinal, 'path_final.csv');
  const integ = pathPoints(run.integrated, 'integrated.csv');
  let ext = extentOf(final.cols[0], final.cols[1]);
  ext = mergeExtents(ext, extentOf(integ.cols[0], integ.cols[1]));
  const scene = new Scene(560, 480, ext);
  scene.polyline(final.cols[0], final.cols[1], '#000', { width: 2.0 });
  scene.polyline(integ.cols[0], integ.cols[1], '#0bb', { width: 1.6, dash: '2,4' });
  if (final.cols.length >= 3) {
    const nArrows = 12;
    const step = Math.max(1, Math.floor(final.t.length / nArrows));
    for (let i = 0; i < final.t.length; i += step) {
      scene.arrow(final.cols[0][i], final.cols[1][i], final.cols[2][i], 16, '#d33');
    }
  }
  scene.circle(final.cols[0][0], final.cols[1][0], 4, '#2a7');
  scene.circle(final.cols[0][final.t.length - 1], final.cols[1][final.t.length - 1], 4, '#d33');
  scene.axes('q_x', 'q_y', 'planar view: final path (solid), integrated path (dotted), heading arrows');
  return { kind: 'planar', svg: scene.render(), boundChecks: [] };
}

interface ControlCurve {
  label: string;
  t: number[];
  values: number[];
  bound: number | null;
}

/**
 * Control profiles. For dynamically extended runs the physical controls are
 * embedded in the state (columns n-m+1 .. n of path_final), and those are the
 * channels the barrier bounds; otherwise the extracted u columns are shown.
 */
export function controlCurves(run: RunDir): ControlCurve[] {
  const summary = run.summary;
  const bounds = new Map<number, number>();
  if (summary?.config?.barrier?.u_max) {
    for (const [ch, v] of Object.entries(summary.config.barrier.u_max)) {
      bounds.set(Number(ch), v as number);
    }
  }
  const curves: ControlCurve[] = [];
  if (summary?.config?.augment && summary.system) {
    const n = summary.system.n;
    const m = summary.system.m;
    const t = column(run.pathFinal, 't', 'path_final.csv');
    for (let ch = 1; ch <= m; ch++) {
      const values = column(run.pathFinal, `x_${n - m + ch}`, 'path_final.csv');
      curves.push({ label: `u${ch}`, t, values, bound: bounds.get(ch) ?? null });
    }
  } else {
    const t = column(run.controls, 't', 'controls.csv');
    const channels = run.controls.header.filter((h) => /^u_\d+$/.test(h));
    for (const name of channels) {
      const ch = Number(name.split('_')[1]);
      curves.push({
        label: `u${ch}`,
        t,
        values: column(run.controls, name, 'controls.csv'),
        bound: bounds.get(ch) ?? null,
      });
    }
  }
  return curves;
}

const CHANNEL_COLORS = ['#1558c0', '#c05515', '#2a7d2a', '#7d2a7d'];

export function renderControls(run: RunDir): Figure {
  const curves = controlCurves(run);
  const all = curves.flatMap((c) => c.values);
  const boundVals = curves.flatMap((c) => (c.bound !== null ? [c.bound, -c.bound] : []));
  const t = curves[0].t;
  let ext = extentOf(t, all.concat(boundVals));
  const scene = new Scene(560, 420, ext);
  const boundChecks: Figure['boundChecks'] = [];
  curves.forEach((c, i) => {
    scene.polyline(c.t, c.values, CHANNEL_COLORS[i % CHANNEL_COLORS.length], { width: 1.8 });
    if (c.bound !== null) {
      scene.hline(c.bound, '#d33');
      scene.hline(-c.bound, '#d33');
      boundChecks.push({
        channel: c.label,
        maxAbs: Math.max(...c.values.map(Math.abs)),
        bound: c.bound,
      });
    }
  });
  curves.forEach((c, i) => {
    scene.label(c.label, 64 + 52 * i, 30, 'start', 12);
  });
  scene.axes('t', 'control', 'control profiles' + (boundChecks.length ? ' with bounds (dashed)' : ''));
  return { kind: 'controls', svg: scene.render(), boundChecks };
}

export function renderConvergence(run: RunDir): Figure {
  const file = 'flow_history.csv';
  const s = column(run.flowHistory, 's', file);
  const action = column(run.flowHistory, 'action', file);
  const residual = column(run.flowHistory, 'residual_max', file);
  const accepted = column(run.flowHistory, 'step_accepted', file);
  const sA: number[] = [];
  const aA: number[] = [];
  const rA: number[] = [];
  for (let i = 0; i < s.length; i++) {
    if (accepted[i] === 1) {
      sA.push(s[i]);
      aA.push(action[i]);
      rA.push(residual[i]);
    }
  }
  const floor = 1e-300;
  const pos = (v: number) => Math.max(v, floor);
  const yVals = aA.concat(rA).map(pos).filter((v) => v > floor);
  const yMin = Math.min(...yVals);
  const yMax = Math.max(...yVals);
  const ext = {
    xMin: Math.min(...sA),
    xMax: Math.max(...sA) || 1,
    yMin: Math.max(yMin / 2, 1e-16),
    yMax: yMax * 2,
  };
  const scene = new Scene(560, 420, ext, true);
  scene.polyline(sA, aA.map(pos), '#1558c0', { width: 1.8 });
  scene.polyline(sA, rA.map(pos), '#c05515', { width: 1.4, dash: '4,3' });
  scene.label('action', 64, 30, 'start', 12);
  scene.label('residual', 130, 30, 'start', 12);
  scene.axes('s', 'value (log)', 'flow convergence (accepted steps)');
  return { kind: 'convergence', svg: scene.render(), boundChecks: [] };
}

export function render(run: RunDir, kind: FigureKind): Figure {
  switch (kind) {
    case 'state3d':
      return renderState3d(run);
    case 'planar':
      return renderPlanar(run);
    case 'controls':
      return renderControls(run);
    case 'convergence':
      return renderConvergence(run);
  }
}

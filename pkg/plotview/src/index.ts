export { CsvError, loadRunDir, parseCsv, readCsv } from './csv.js';
export type { RunDir, Summary, Table } from './csv.js';
export { FIGURE_KINDS, controlCurves, render, renderControls, renderConvergence, renderPlanar, renderState3d } from './figures.js';
export type { Figure, FigureKind } from './figures.js';

export { parseCsv, num } from "./csv.js";
export { buildFigure, KINDS } from "./series.js";
export type { Kind, Figure, Series } from "./series.js";
export { renderSvg } from "./svg.js";

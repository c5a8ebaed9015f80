export { SchemaError } from "./errors";
export { readTable, columnIndex, numericColumn, stringColumn } from "./csv";
export { gaussianKde, silvermanBandwidth, weightedHistogram } from "./kde";
export {
  FIGURE_KINDS,
  MSE_PIPELINES,
  buildFigure,
} from "./model";
export type { FigureKind, FigureModel, Panel, Series } from "./model";
export { paint } from "./paint";
export { main } from "./cli";

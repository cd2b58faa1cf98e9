/** Rendering driver: recipe -> SVG file. */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { FigureId, RECIPES } from "./recipes.js";
import { renderSvg } from "./svg.js";

export function renderFigure(id: FigureId, dataDir: string): string {
  const recipe = RECIPES[id];
  if (!recipe) {
    throw new Error(`unknown figure id '${id}'`);
  }
  return renderSvg(recipe.build(dataDir));
}

export function renderToFile(id: FigureId, dataDir: string, outDir: string): string {
  const svg = renderFigure(id, dataDir);
  mkdirSync(outDir, { recursive: true });
  const path = join(outDir, `${id}.svg`);
  writeFileSync(path, svg);
  return path;
}

export function renderAll(dataDir: string, outDir: string): string[] {
  return (Object.keys(RECIPES) as FigureId[]).map((id) =>
    renderToFile(id, dataDir, outDir));
}

/** Driver script: render all shipped recipes (or one by id). */

import { argv, exit } from "node:process";
import { FigureId, RECIPES } from "./recipes.js";
import { renderAll, renderToFile } from "./render.js";

function arg(name: string, fallback: string): string {
  const k = argv.indexOf(`--${name}`);
  return k >= 0 && argv[k + 1] ? argv[k + 1] : fallback;
}

const dataDir = arg("data", "../data");
const outDir = arg("out", "../out/figures");
const only = arg("only", "");

try {
  if (only) {
    if (!(only in RECIPES)) {
      console.error(`unknown figure '${only}'; known: ${Object.keys(RECIPES).join(", ")}`);
      exit(1);
    }
    console.log(renderToFile(only as FigureId, dataDir, outDir));
  } else {
    for (const path of renderAll(dataDir, outDir)) {
      console.log(path);
    }
  }
} catch (err) {
  console.error(String(err));
  exit(1);
}

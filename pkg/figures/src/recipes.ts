/** Figure recipes: which sweep CSVs feed each figure and how the panels are
 * assembled.  Recipes only read the documented summary/prediction schemas. */

import { join } from "node:path";
import { loadPredictions, loadSummary, SchemaError, SummaryRow } from "./schema.js";
import { PALETTE, PanelSpec, Series } from "./svg.js";

export type FigureId = "fig1" | "fig2" | "fig3" | "fig4" | "fig5" | "figsw";

export interface FigureRecipe {
  id: FigureId;
  /** summary.csv labels consumed (under <dataDir>/<label>/summary.csv) */
  inputs: string[];
  /** prediction CSVs consumed (under <dataDir>/) */
  predictions: string[];
  build(dataDir: string): PanelSpec[];
}

const SIGMA = "final energy variance";

function summary(dataDir: string, label: string): SummaryRow[] {
  return loadSummary(join(dataDir, label, "summary.csv"));
}

function tauSeries(rows: SummaryRow[], label: string, color: string,
                   dashed = false): Series {
  return {
    label,
    x: rows.map((r) => r.tau_or_v),
    y: rows.map((r) => r.sigma2),
    yerr: rows.map((r) => r.sigma2_err),
    color,
    dashed,
  };
}

function swOverlay(dataDir: string, file: string, beta: number,
                   color: string): { y: number; color: string; label: string } {
  const rows = loadPredictions(join(dataDir, file));
  let best = rows[0];
  for (const r of rows) {
    if (Math.abs(r.beta - beta) < Math.abs(best.beta - beta)) best = r;
  }
  if (Math.abs(best.beta - beta) > 1e-9 * Math.max(1, beta)) {
    throw new SchemaError(
      `${file}: no prediction row at beta = ${beta} (closest ${best.beta})`);
  }
  return { y: best.sigma2_sw, color, label: `analytic (beta=${beta})` };
}

const PROTOCOLS: { tag: string; name: string }[] = [
  { tag: "ii", name: "I-I" },
  { tag: "in", name: "I-N" },
  { tag: "nn", name: "N-N" },
];

export const RECIPES: Record<FigureId, FigureRecipe> = {
  fig1: {
    id: "fig1",
    inputs: PROTOCOLS.flatMap((p) => [`fig1_${p.tag}_forward`, `fig1_${p.tag}_cyclic`]),
    predictions: ["predictions_integrable.csv", "predictions_nonintegrable.csv"],
    build(dataDir) {
      const panels: PanelSpec[] = [];
      for (const kind of ["forward", "cyclic"] as const) {
        const series = PROTOCOLS.map((p, k) =>
          tauSeries(summary(dataDir, `fig1_${p.tag}_${kind}`), p.name, PALETTE[k]));
        const hLines = kind === "forward"
          ? [swOverlay(dataDir, "predictions_integrable.csv", 0.229, PALETTE[0]),
             swOverlay(dataDir, "predictions_nonintegrable.csv", 1.0, PALETTE[1])]
          : [];
        panels.push({
          title: `${kind} drive`,
          xLabel: "ramp time tau",
          yLabel: SIGMA,
          xLog: true,
          yLog: true,
          series,
          hLines,
        });
      }
      return panels;
    },
  },

  fig2: {
    id: "fig2",
    inputs: PROTOCOLS.flatMap((p) => [
      `fig1_${p.tag}_forward`, `fig1_${p.tag}_cyclic`,
      `fig2_${p.tag}_forward_l3`, `fig2_${p.tag}_cyclic_l3`,
    ]),
    predictions: [],
    build(dataDir) {
      return PROTOCOLS.map((p) => ({
        title: `${p.name} protocol`,
        xLabel: "ramp time tau",
        yLabel: SIGMA,
        xLog: true,
        yLog: true,
        series: [
          tauSeries(summary(dataDir, `fig1_${p.tag}_forward`), "forward l=0", PALETTE[0], true),
          tauSeries(summary(dataDir, `fig2_${p.tag}_forward_l3`), "forward l=3", PALETTE[1], true),
          tauSeries(summary(dataDir, `fig1_${p.tag}_cyclic`), "cyclic l=0", PALETTE[0]),
          tauSeries(summary(dataDir, `fig2_${p.tag}_cyclic_l3`), "cyclic l=3", PALETTE[1]),
        ],
      }));
    },
  },

  fig3: {
    id: "fig3",
    inputs: ["fig3_linear"],
    predictions: [],
    build(dataDir) {
      const rows = summary(dataDir, "fig3_linear");
      const velocities = [...new Set(rows.map((r) => r.tau_or_v))].sort((a, b) => a - b);
      const series = velocities.map((v, k) => {
        const sub = rows.filter((r) => r.tau_or_v === v);
        return {
          label: `v = ${v}`,
          x: sub.map((r) => r.beta_f),
          y: sub.map((r) => r.sigma2),
          yerr: sub.map((r) => r.sigma2_err),
          color: PALETTE[k % PALETTE.length],
        };
      });
      return [{
        title: "linear ramp-and-reverse",
        xLabel: "final strength beta_f",
        yLabel: SIGMA,
        xLog: false,
        yLog: true,
        series,
      }];
    },
  },

  fig4: {
    id: "fig4",
    inputs: ["fig4_wait_none", "fig4_wait_fixed", "fig4_wait_random"],
    predictions: [],
    build(dataDir) {
      return [{
        title: "cyclic I-I wait policies",
        xLabel: "ramp time tau",
        yLabel: SIGMA,
        xLog: true,
        yLog: true,
        series: [
          tauSeries(summary(dataDir, "fig4_wait_none"), "no wait", PALETTE[0]),
          tauSeries(summary(dataDir, "fig4_wait_fixed"), "fixed wait", PALETTE[1]),
          tauSeries(summary(dataDir, "fig4_wait_random"), "randomized wait", PALETTE[2]),
        ],
      }];
    },
  },

  fig5: {
    id: "fig5",
    inputs: PROTOCOLS.flatMap((p) => [
      `fig5_${p.tag}_forward`, `fig5_${p.tag}_cyclic`,
      `fig1_${p.tag}_forward`, `fig1_${p.tag}_cyclic`,
    ]),
    predictions: [],
    build(dataDir) {
      const panels: PanelSpec[] = [];
      for (const kind of ["forward", "cyclic"] as const) {
        const series: Series[] = [];
        const hLines: PanelSpec["hLines"] = [];
        PROTOCOLS.forEach((p, k) => {
          const rows = summary(dataDir, `fig5_${p.tag}_${kind}`);
          series.push({
            label: p.name,
            x: rows.map((r) => r.cd_order),
            y: rows.map((r) => r.sigma2),
            yerr: rows.map((r) => r.sigma2_err),
            color: PALETTE[k],
          });
          // slow-driving reference: the tau = 10 point of the unassisted sweep
          const slow = summary(dataDir, `fig1_${p.tag}_${kind}`)
            .reduce((a, b) => (a.tau_or_v > b.tau_or_v ? a : b));
          hLines.push({ y: slow.sigma2, color: PALETTE[k],
                        label: `${p.name} slow limit` });
        });
        panels.push({
          title: `${kind}, tau = 1e-4`,
          xLabel: "expansion order l",
          yLabel: SIGMA,
          xLog: false,
          yLog: true,
          series,
          hLines,
        });
      }
      return panels;
    },
  },

  figsw: {
    id: "figsw",
    inputs: ["figsw_ii", "figsw_ni"],
    predictions: ["predictions_integrable.csv", "predictions_nonintegrable.csv"],
    build(dataDir) {
      const series: Series[] = [];
      const models = [
        { label: "integrable", run: "figsw_ii", pred: "predictions_integrable.csv" },
        { label: "nonintegrable", run: "figsw_ni", pred: "predictions_nonintegrable.csv" },
      ];
      models.forEach((m, k) => {
        const rows = summary(dataDir, m.run);
        series.push({
          label: `${m.label} (measured)`,
          x: rows.map((r) => r.beta_f),
          y: rows.map((r) => r.sigma2),
          yerr: rows.map((r) => r.sigma2_err),
          color: PALETTE[k],
          dots: true,
        });
        const pred = loadPredictions(join(dataDir, m.pred));
        series.push({
          label: `${m.label} (analytic)`,
          x: pred.map((r) => r.beta),
          y: pred.map((r) => r.sigma2_sw),
          color: PALETTE[k],
          dashed: true,
        });
      });
      return [{
        // m = omega = E0 = 1, so beta/beta_0 is numerically beta
        title: "slow-drive variance vs strength",
        xLabel: "beta / beta_0 (dimensionless)",
        yLabel: SIGMA,
        xLog: true,
        yLog: true,
        series,
      }];
    },
  },
};

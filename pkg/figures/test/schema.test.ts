import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { loadPredictions, loadSummary, SchemaError } from "../src/schema.js";

const HEADER = "experiment,protocol,tau_or_v,beta_f,cd_order,wait_kind,n,sigma2,sigma2_err";
const ROW = "forward,I-I,10.0,0.229,0,none,100,7.2e-05,1.1e-06";

function writeTmp(name: string, text: string): string {
  const dir = mkdtempSync(join(tmpdir(), "figtest-"));
  const path = join(dir, name);
  writeFileSync(path, text);
  return path;
}

describe("summary schema", () => {
  it("parses a valid file", () => {
    const rows = loadSummary(writeTmp("ok.csv", `${HEADER}\n${ROW}\n`));
    expect(rows).toHaveLength(1);
    expect(rows[0].protocol).toBe("I-I");
    expect(rows[0].sigma2).toBeCloseTo(7.2e-5, 10);
    expect(rows[0].n).toBe(100);
  });

  it("fails loudly on a missing column", () => {
    const noErr = HEADER.replace(",sigma2_err", "");
    const row = ROW.replace(",1.1e-06", "");
    expect(() => loadSummary(writeTmp("bad.csv", `${noErr}\n${row}\n`)))
      .toThrowError(/missing required column 'sigma2_err'/);
  });

  it("fails loudly on empty data", () => {
    expect(() => loadSummary(writeTmp("empty.csv", `${HEADER}\n`)))
      .toThrowError(SchemaError);
  });

  it("fails on non-numeric values", () => {
    const row = ROW.replace("7.2e-05", "soup");
    expect(() => loadSummary(writeTmp("nan.csv", `${HEADER}\n${row}\n`)))
      .toThrowError(SchemaError);
  });

  it("fails on unknown experiment kinds", () => {
    const row = ROW.replace("forward", "sideways");
    expect(() => loadSummary(writeTmp("kind.csv", `${HEADER}\n${row}\n`)))
      .toThrowError(SchemaError);
  });
});

describe("prediction schema", () => {
  it("parses a valid file", () => {
    const rows = loadPredictions(writeTmp("p.csv",
      "model,beta,sigma2_sw\nintegrable,0.229,7.28e-05\n"));
    expect(rows[0].beta).toBeCloseTo(0.229, 12);
  });

  it("fails on a missing column", () => {
    expect(() => loadPredictions(writeTmp("p2.csv", "model,beta\nintegrable,1\n")))
      .toThrowError(/missing required column 'sigma2_sw'/);
  });
});

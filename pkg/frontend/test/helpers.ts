import { readFileSync } from "node:fs";
import { join } from "node:path";

const ROOT = join(__dirname, "..", "..");

export function loadVectors(name: string): any {
  return JSON.parse(
    readFileSync(join(ROOT, "testvectors", name), "utf-8"),
  );
}

export function loadFixture(name: string): any {
  return JSON.parse(
    readFileSync(join(ROOT, "src", "crowdforge", "fixtures", `${name}.json`), "utf-8"),
  );
}

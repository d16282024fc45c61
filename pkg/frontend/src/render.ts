/**
 * CLI: render a convergence CSV as a log-log SVG figure.
 *
 *   node dist/render.js --in temporal.csv --out temporal.svg --guide-slope 0.5
 *
 * `--guide-slope` may repeat (e.g. 0.5 and 2). Error bars are drawn for rows
 * whose std_error is positive.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { parseConvergenceCsv } from "./csv.js";
import { buildFigure, figureToSvg } from "./figure.js";

export interface RenderArgs {
  input: string;
  output: string;
  guideSlopes: number[];
  title?: string;
}

export function parseArgs(argv: string[]): RenderArgs {
  let input: string | undefined;
  let output: string | undefined;
  const guideSlopes: number[] = [];
  let title: string | undefined;

  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`missing value for ${flag}`);
      return argv[++i];
    };
    switch (flag) {
      case "--in":
        input = next();
        break;
      case "--out":
        output = next();
        break;
      case "--guide-slope":
        guideSlopes.push(Number(next()));
        break;
      case "--title":
        title = next();
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!input || !output) throw new Error("--in and --out are required");
  if (guideSlopes.some((s) => !Number.isFinite(s))) throw new Error("--guide-slope must be numeric");
  return { input, output, guideSlopes, title };
}

export function render(args: RenderArgs): void {
  const table = parseConvergenceCsv(readFileSync(args.input, "utf8"));
  const model = buildFigure(table.rows, {
    guideSlopes: args.guideSlopes,
    title: args.title,
  });
  writeFileSync(args.output, figureToSvg(model));
  const fitted = table.slope ? ` (fitted slope ${table.slope.slope.toFixed(4)})` : "";
  console.log(`wrote ${args.output}: ${model.points.length} points${fitted}`);
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  try {
    render(parseArgs(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(2);
  }
}

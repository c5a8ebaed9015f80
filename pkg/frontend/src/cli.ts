#!/usr/bin/env node
import yargs from "yargs";
import { SchemaError } from "./errors";
import { FIGURE_KINDS, FigureKind, buildFigure } from "./model";
import { paint } from "./paint";

/** Run one figure job; returns the process exit code. */
export async function main(argv: string[]): Promise<number> {
  let parsed;
  try {
    parsed = await yargs(argv)
      .usage("figures --job <kind> --in <csv...> --out <png>")
      .option("job", {
        type: "string",
        choices: FIGURE_KINDS as unknown as string[],
        demandOption: true,
        describe: "figure kind",
      })
      .option("in", {
        type: "string",
        array: true,
        demandOption: true,
        describe: "input CSV path(s)",
      })
      .option("out", {
        type: "string",
        demandOption: true,
        describe: "output PNG path",
      })
      .strict()
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parse();
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }

  try {
    const model = buildFigure(parsed.job as FigureKind, parsed.in as string[]);
    await paint(model, parsed.out as string);
    const nSeries = model.panels.reduce((a, p) => a + p.series.length, 0);
    console.log(
      `wrote ${parsed.out}: ${model.panels.length} panel(s), ${nSeries} series`,
    );
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  void main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}

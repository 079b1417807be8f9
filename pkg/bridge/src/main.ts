import { parseArgs } from "util";
import { loadPlugin, stubScorer } from "./scoring";
import { BridgeConfig, serveStdio, serveTcp } from "./server";

function main(): void {
  let values;
  try {
    ({ values } = parseArgs({
      options: {
        stdio: { type: "boolean", default: false },
        listen: { type: "string" },
        tag: { type: "string", default: "bridge-ts" },
        plugin: { type: "string" },
      },
    }));
  } catch (error) {
    process.stderr.write(`${(error as Error).message}\n`);
    process.exit(1);
  }
  if (values.stdio && values.listen) {
    process.stderr.write("--stdio and --listen are mutually exclusive\n");
    process.exit(1);
  }
  let config: BridgeConfig;
  try {
    config = {
      listen: values.listen ?? null,
      tag: values.tag as string,
      scorer: values.plugin ? loadPlugin(values.plugin) : stubScorer,
    };
  } catch (error) {
    process.stderr.write(`${(error as Error).message}\n`);
    process.exit(1);
  }
  try {
    if (config.listen) {
      serveTcp(config);
    } else {
      serveStdio(config);
    }
  } catch (error) {
    process.stderr.write(`${(error as Error).message}\n`);
    process.exit(1);
  }
}

main();

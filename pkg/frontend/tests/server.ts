/** Spawns a real `personagen serve` (training a throwaway checkpoint first)
 * so the client tests run against the actual HTTP surface. */

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface StudioServer {
  base: string;
  stop: () => void;
}

const CONFIG = [
  "steps = 40",
  "lr = 1e-3",
  "z_dim = 8",
  "gen_hidden = 48",
  "disc_hidden = 32, 16",
  "prompts_per_step = 3",
  "checkpoint_every = 40",
  "seed = 0",
  "",
].join("\n");

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export async function startStudio(): Promise<StudioServer> {
  const root = mkdtempSync(join(tmpdir(), "studio-test-"));
  const configPath = join(root, "config.txt");
  writeFileSync(configPath, CONFIG);

  const trained = spawnSync("personagen", ["train", "--config", configPath, "--out", join(root, "run")], {
    encoding: "utf-8",
  });
  if (trained.status !== 0) {
    throw new Error(`train failed: ${trained.stderr}`);
  }

  const port = 9200 + Math.floor(Math.random() * 400);
  const base = `http://127.0.0.1:${port}`;
  const proc: ChildProcess = spawn(
    "personagen",
    [
      "serve",
      "--checkpoint",
      join(root, "run", "checkpoint_final.pt"),
      "--data-dir",
      join(root, "studio-data"),
      "--port",
      String(port),
    ],
    { stdio: "ignore" },
  );

  for (let attempt = 0; ; attempt += 1) {
    try {
      const resp = await fetch(`${base}/health`);
      if (resp.ok) {
        break;
      }
    } catch {
      // not listening yet
    }
    if (attempt > 100 || proc.exitCode !== null) {
      proc.kill();
      throw new Error("studio service never came up");
    }
    await sleep(200);
  }

  return {
    base,
    stop: () => {
      proc.kill("SIGTERM");
      rmSync(root, { recursive: true, force: true });
    },
  };
}

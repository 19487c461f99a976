/**
 * Thin Node wrapper over the chopthin-smc resampling CLI.
 *
 * Each call spawns one `resample` invocation, streams the weights over stdin
 * as shortest round-trip decimals (lossless for IEEE-754 binary64 in both
 * directions) and parses the `ancestor,weight` CSV reply. Ancestors are
 * converted from the CLI's 1-based text form to the library's 0-based
 * convention. Core validation and degeneracy errors surface as
 * {@link ChopthinCliError} with the core's message and exit code.
 */

import { spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import path from "node:path";

export interface ResampleResult {
  /** 0-based indices into the input weight vector. */
  ancestors: number[];
  /** Offspring weights, bit-exact as emitted by the core. */
  weights: number[];
}

export interface CliOptions {
  /** Python interpreter to run; defaults to $CHOPTHIN_PYTHON or python3. */
  pythonExe?: string;
  /** Extra environment entries for the subprocess. */
  env?: Record<string, string>;
}

export class ChopthinCliError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number,
    public readonly stderr: string,
  ) {
    super(message);
    this.name = "ChopthinCliError";
  }
}

/** Core CLI version line this wrapper is built against (major.minor). */
export const PINNED_CORE_VERSION = "0.1";

export const BASELINE_SCHEMES = [
  "multinomial",
  "multinomial-condbinom",
  "systematic",
  "stratified",
  "residual",
  "residual-stratified",
  "branching",
] as const;

export type BaselineScheme = (typeof BASELINE_SCHEMES)[number];
export type Scheme = BaselineScheme | "chopthin";

/** Resample with the bounded weight-ratio chop/thin scheme. */
export function chopthinResample(
  weights: readonly number[],
  nOut: number,
  eta: number,
  seed: number,
  opts: CliOptions = {},
): Promise<ResampleResult> {
  return runResample("chopthin", weights, nOut, seed, eta, opts);
}

/** Resample with one of the equal-weight baseline schemes. */
export function baselineResample(
  scheme: BaselineScheme,
  weights: readonly number[],
  nOut: number,
  seed: number,
  opts: CliOptions = {},
): Promise<ResampleResult> {
  return runResample(scheme, weights, nOut, seed, undefined, opts);
}

function cliArgs(scheme: Scheme, nOut: number, seed: number, eta?: number): string[] {
  const args = [
    "-m",
    "chopthin_smc",
    "resample",
    "--scheme",
    scheme,
    "--n-out",
    String(nOut),
    "--seed",
    String(seed),
  ];
  if (eta !== undefined) {
    args.push("--eta", String(eta));
  }
  return args;
}

async function runResample(
  scheme: Scheme,
  weights: readonly number[],
  nOut: number,
  seed: number,
  eta: number | undefined,
  opts: CliOptions,
): Promise<ResampleResult> {
  const input = weights.map((w) => w.toString()).join("\n") + "\n";
  const { code, stdout, stderr } = await runCli(cliArgs(scheme, nOut, seed, eta), input, opts);
  if (code !== 0) {
    throw new ChopthinCliError(lastErrorLine(stderr), code, stderr);
  }
  return parseCsv(stdout);
}

/** Run the core CLI directly; exported so callers can reach other subcommands. */
export function runCli(
  args: string[],
  input: string,
  opts: CliOptions = {},
): Promise<{ code: number; stdout: string; stderr: string }> {
  const pythonExe = opts.pythonExe ?? process.env.CHOPTHIN_PYTHON ?? "python3";
  const env = {
    ...process.env,
    PYTHONPATH: pythonPathWithCore(),
    ...opts.env,
  };
  return new Promise((resolve, reject) => {
    const child = spawn(pythonExe, args, { env });
    let stdout = "";
    let stderr = "";
    child.stdout.setEncoding("utf8").on("data", (chunk) => (stdout += chunk));
    child.stderr.setEncoding("utf8").on("data", (chunk) => (stderr += chunk));
    child.on("error", reject);
    child.on("close", (code) => resolve({ code: code ?? -1, stdout, stderr }));
    child.stdin.end(input);
  });
}

function pythonPathWithCore(): string {
  // works from a checkout where the core's src/ sits beside this package;
  // harmless when the core is installed
  const here = path.dirname(fileURLToPath(import.meta.url));
  const coreSrc = path.resolve(here, "..", "..", "..", "src");
  const existing = process.env.PYTHONPATH;
  return existing ? `${coreSrc}${path.delimiter}${existing}` : coreSrc;
}

function lastErrorLine(stderr: string): string {
  const lines = stderr
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  return lines.length ? lines[lines.length - 1].replace(/^Error:\s*/, "") : "resample failed";
}

function parseCsv(stdout: string): ResampleResult {
  const lines = stdout.split("\n").filter((l) => l.length > 0);
  if (lines[0] !== "ancestor,weight") {
    throw new ChopthinCliError(`unexpected CLI output header: ${lines[0]}`, -1, "");
  }
  const ancestors: number[] = [];
  const weights: number[] = [];
  for (const line of lines.slice(1)) {
    const comma = line.indexOf(",");
    ancestors.push(Number.parseInt(line.slice(0, comma), 10) - 1);
    weights.push(Number.parseFloat(line.slice(comma + 1)));
  }
  return { ancestors, weights };
}

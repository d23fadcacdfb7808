import { spawn } from "node:child_process";

export interface RunnerRequest {
  source: string;
  timeout_s: number;
}

export interface RunnerReply {
  status: "success" | "error" | "timeout";
  answer: string | null;
  stderr: string;
  duration_ms: number;
}

const SENTINEL = "<<<ANSWER>>>";
const STDERR_LIMIT = 2000;
// Keep only the tail of huge candidate output; the answer is parsed from the end.
const STDOUT_TAIL = 256 * 1024;
// Hard ceiling past the requested timeout before the child is killed outright.
const KILL_SLACK_MS = 1000;

const PYTHON = process.env.CANDIDATE_PYTHON || "python3";

// Harness around the candidate: a fresh namespace with common math imports
// pre-bound (numpy/sympy lazily, so unused heavyweights cost nothing), then a
// footer that prints a sentinel line followed by the `answer` variable. When
// the candidate never assigns `answer`, the last non-empty line it printed
// before the sentinel is taken instead.
const PY_HARNESS = `
import importlib
import sys
import traceback


class _LazyModule:
    def __init__(self, name):
        self._name = name
        self._module = None

    def __getattr__(self, attr):
        if self._module is None:
            self._module = importlib.import_module(self._name)
        return getattr(self._module, attr)


namespace = {"__name__": "__main__"}
for _name in ("math", "fractions", "itertools", "collections", "functools", "re"):
    namespace[_name] = importlib.import_module(_name)
namespace["Fraction"] = namespace["fractions"].Fraction
namespace["numpy"] = namespace["np"] = _LazyModule("numpy")
namespace["sympy"] = _LazyModule("sympy")

_source = sys.stdin.read()
try:
    exec(compile(_source, "<candidate>", "exec"), namespace)
except BaseException:
    traceback.print_exc()
    sys.exit(1)
print("${SENTINEL}")
if "answer" in namespace:
    print(namespace["answer"])
`;

export function validateRequest(raw: string): RunnerRequest {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch (error) {
    throw new Error(`malformed request: ${(error as Error).message}`);
  }
  if (typeof parsed !== "object" || parsed === null) {
    throw new Error("malformed request: expected an object");
  }
  const record = parsed as Record<string, unknown>;
  if (typeof record.source !== "string") {
    throw new Error("malformed request: 'source' must be a string");
  }
  const timeout = record.timeout_s;
  if (typeof timeout !== "number" || !Number.isInteger(timeout) || timeout < 1) {
    throw new Error("malformed request: 'timeout_s' must be an integer >= 1");
  }
  return { source: record.source, timeout_s: timeout };
}

function parseAnswer(stdout: string): string | null {
  const at = stdout.lastIndexOf(SENTINEL);
  if (at < 0) {
    return null;
  }
  const after = stdout.slice(at + SENTINEL.length).trim();
  if (after) {
    return after;
  }
  const before = stdout
    .slice(0, at)
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  return before.length ? before[before.length - 1] : null;
}

export function runOnce(request: RunnerRequest): Promise<RunnerReply> {
  const started = Date.now();
  return new Promise((resolve) => {
    let stdout = "";
    let stderr = "";
    let timedOut = false;
    let settled = false;

    const finish = (reply: RunnerReply) => {
      if (!settled) {
        settled = true;
        resolve(reply);
      }
    };

    // -I: isolated mode, no user site or env hooks leak into candidates.
    const child = spawn(PYTHON, ["-I", "-c", PY_HARNESS], {
      stdio: ["pipe", "pipe", "pipe"],
    });

    const killTimer = setTimeout(() => {
      timedOut = true;
      child.kill("SIGKILL");
    }, request.timeout_s * 1000);
    const hardTimer = setTimeout(() => {
      child.kill("SIGKILL");
    }, request.timeout_s * 1000 + KILL_SLACK_MS);

    child.on("error", (error) => {
      clearTimeout(killTimer);
      clearTimeout(hardTimer);
      finish({
        status: "error",
        answer: null,
        stderr: `cannot start ${PYTHON}: ${error.message}`.slice(0, STDERR_LIMIT),
        duration_ms: Date.now() - started,
      });
    });

    child.stdout.on("data", (chunk: Buffer) => {
      stdout += chunk.toString();
      if (stdout.length > STDOUT_TAIL) {
        stdout = stdout.slice(-STDOUT_TAIL);
      }
    });
    child.stderr.on("data", (chunk: Buffer) => {
      if (stderr.length < STDERR_LIMIT) {
        stderr += chunk.toString();
      }
    });

    child.on("close", (code) => {
      clearTimeout(killTimer);
      clearTimeout(hardTimer);
      const duration = Date.now() - started;
      if (timedOut) {
        finish({
          status: "timeout",
          answer: null,
          stderr: stderr.slice(0, STDERR_LIMIT),
          duration_ms: duration,
        });
        return;
      }
      if (code !== 0) {
        finish({
          status: "error",
          answer: null,
          stderr: (stderr || `candidate exited with code ${code}`).slice(0, STDERR_LIMIT),
          duration_ms: duration,
        });
        return;
      }
      const answer = parseAnswer(stdout);
      if (answer === null) {
        finish({
          status: "error",
          answer: null,
          stderr: (stderr || "candidate produced no answer").slice(0, STDERR_LIMIT),
          duration_ms: duration,
        });
        return;
      }
      finish({
        status: "success",
        answer,
        stderr: stderr.slice(0, STDERR_LIMIT),
        duration_ms: duration,
      });
    });

    child.stdin.on("error", () => {
      // A instantly-dead child closes its pipe before we finish writing; the
      // close handler reports the real failure.
    });
    child.stdin.write(request.source);
    child.stdin.end();
  });
}

/**
 * Entry point: one request object on stdin, one reply object on stdout.
 *
 * Every input, including garbage, yields exactly one well-formed reply and
 * exit code 0; infrastructure failures inside the runner itself are reported
 * as error replies rather than silence.
 */

import { runOnce, validateRequest, RunnerReply } from "./runner";

function readStdin(): Promise<string> {
  return new Promise((resolve) => {
    let data = "";
    process.stdin.setEncoding("utf-8");
    process.stdin.on("data", (chunk) => {
      data += chunk;
    });
    process.stdin.on("end", () => resolve(data));
  });
}

function emit(reply: RunnerReply): void {
  process.stdout.write(JSON.stringify(reply) + "\n");
}

async function main(): Promise<void> {
  const raw = await readStdin();
  let reply: RunnerReply;
  try {
    const request = validateRequest(raw);
    reply = await runOnce(request);
  } catch (error) {
    reply = {
      status: "error",
      answer: null,
      stderr: String((error as Error).message ?? error).slice(0, 2000),
      duration_ms: 0,
    };
  }
  emit(reply);
}

main().then(
  () => process.exit(0),
  (error) => {
    emit({
      status: "error",
      answer: null,
      stderr: `runner failure: ${String(error)}`.slice(0, 2000),
      duration_ms: 0,
    });
    process.exit(0);
  },
);

#!/usr/bin/env python3
"""Scripted runner-protocol stub for exercising the harness side of execution.

Never executes anything; behavior is keyed off markers in the source so tests
can provoke each reply shape:

  HANG        never reply (forces the harness grace-period kill)
  BAD_REPLY   print something that is not a reply object
  NO_ANSWER   success reply with a null answer
  SLOW_LOOP   sleep for timeout_s, then reply timeout (a well-behaved runner
              whose candidate ran out of wall clock)
  EXPLODE     error reply with a traceback excerpt
  answer = N  success reply echoing the integer literal
"""

import json
import re
import sys
import time


def main() -> None:
    raw = sys.stdin.read()
    try:
        request = json.loads(raw)
        source = str(request["source"])
        timeout_s = int(request["timeout_s"])
    except (ValueError, KeyError, TypeError):
        print(json.dumps({"status": "error", "answer": None, "stderr": "bad request", "duration_ms": 0}))
        return

    if "HANG" in source:
        time.sleep(timeout_s + 60)
        return
    if "BAD_REPLY" in source:
        print("this is not a reply object")
        return
    if "NO_ANSWER" in source:
        print(json.dumps({"status": "success", "answer": None, "stderr": "", "duration_ms": 3}))
        return
    if "SLOW_LOOP" in source:
        time.sleep(timeout_s)
        print(
            json.dumps(
                {"status": "timeout", "answer": None, "stderr": "", "duration_ms": timeout_s * 1000}
            )
        )
        return
    if "EXPLODE" in source:
        print(
            json.dumps(
                {
                    "status": "error",
                    "answer": None,
                    "stderr": "ZeroDivisionError: division by zero",
                    "duration_ms": 5,
                }
            )
        )
        return
    match = re.search(r"answer\s*=\s*(-?\d+)", source)
    if match:
        print(
            json.dumps(
                {"status": "success", "answer": match.group(1), "stderr": "", "duration_ms": 7}
            )
        )
        return
    print(json.dumps({"status": "error", "answer": None, "stderr": "unscripted source", "duration_ms": 1}))


if __name__ == "__main__":
    main()

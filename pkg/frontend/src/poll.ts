// Run-status polling at a fixed interval. Concurrent polls for the same
// run are coalesced onto one in-flight request.

import type { ApiClient } from "./api";
import type { RunRecord, RunStatus } from "./types";

export const POLL_INTERVAL_MS = 2000;

const TERMINAL: RunStatus[] = ["done", "failed", "incomplete"];

export function isTerminal(status: RunStatus): boolean {
  return TERMINAL.includes(status);
}

export class RunPoller {
  private inFlight = new Map<string, Promise<RunRecord>>();

  constructor(private api: ApiClient) {}

  /** One coalesced status fetch. */
  poll(runId: string): Promise<RunRecord> {
    const pending = this.inFlight.get(runId);
    if (pending) return pending;
    const request = this.api.getRun(runId).finally(() => {
      this.inFlight.delete(runId);
    });
    this.inFlight.set(runId, request);
    return request;
  }

  /** Poll until the run reaches a terminal status. */
  async waitForRun(
    runId: string,
    onUpdate?: (record: RunRecord) => void,
    intervalMs: number = POLL_INTERVAL_MS,
  ): Promise<RunRecord> {
    for (;;) {
      const record = await this.poll(runId);
      onUpdate?.(record);
      if (isTerminal(record.status)) return record;
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}

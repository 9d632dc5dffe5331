// Audit feed poller: pulls new events by cursor on a fixed interval and hands
// them to a sink. Also a long-poll helper for proposal status toasts.

import { ApiClient } from "./api.js";
import { ActionResource, AuditEvent } from "./types.js";

export class AuditPoller {
    private cursor: string | null = null;
    private timer: ReturnType<typeof setInterval> | null = null;
    private stopped = false;

    constructor(
        private client: ApiClient,
        private sink: (events: AuditEvent[]) => void,
        private intervalMs = 5000,
    ) {}

    async pollOnce(): Promise<void> {
        let page = await this.client.audit({ cursor: this.cursor, limit: 200 });
        while (true) {
            if (page.events.length) {
                const last = page.events[page.events.length - 1];
                this.cursor = String(last.offset + 1);
                this.sink(page.events);
            }
            if (!page.next_cursor) break;
            page = await this.client.audit({ cursor: page.next_cursor, limit: 200 });
        }
    }

    start(): void {
        void this.pollOnce();
        this.timer = setInterval(() => {
            if (!this.stopped) void this.pollOnce().catch(() => undefined);
        }, this.intervalMs);
    }

    stop(): void {
        this.stopped = true;
        if (this.timer !== null) clearInterval(this.timer);
    }
}

// Follow one proposal until it decides (or the caller's patience runs out).
export async function followDecision(
    client: ApiClient,
    actionId: string,
    onUpdate: (action: ActionResource) => void,
    rounds = 12,
): Promise<ActionResource> {
    let action = await client.getAction(actionId);
    onUpdate(action);
    for (let i = 0; i < rounds && action.status === "PROPOSED"; i++) {
        action = await client.waitAction(actionId);
        onUpdate(action);
    }
    return action;
}

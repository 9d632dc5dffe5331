import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ApiError } from "../src/types.js";
import { MockApi, actionResource } from "./mock.js";

function client(mock: MockApi): ApiClient {
    return new ApiClient("", "tok-abc", mock.fetch);
}

describe("ApiClient", () => {
    it("sends the bearer token on every request", async () => {
        const mock = new MockApi().on("GET", /\/api\/v1\/actions$/, () => ({ json: [] }));
        const recording: RequestInit[] = [];
        const wrapped = async (input: string, init?: RequestInit) => {
            recording.push(init!);
            return mock.fetch(input, init);
        };
        await new ApiClient("", "tok-abc", wrapped).listActions();
        expect((recording[0].headers as Record<string, string>).Authorization).toBe("Bearer tok-abc");
    });

    it("proposing an action POSTs the documented endpoint once", async () => {
        const mock = new MockApi().on("POST", /\/api\/v1\/actions$/, (call) => ({
            json: { action: actionResource({ action_type: (call.body as any).action_type }) },
        }));
        const result = await client(mock).proposeAction({
            action_type: "post_message",
            payload: { channel: "general", text: "hi" },
        });
        expect(result.action.action_type).toBe("post_message");
        expect(mock.callsTo("POST", "/api/v1/actions")).toHaveLength(1);
    });

    it("casting a vote POSTs to the action's votes subresource", async () => {
        const mock = new MockApi().on("POST", /\/api\/v1\/actions\/act-000001\/votes$/, () => ({
            json: { kind: "boolean", status: "PROPOSED", voters: 2, yes: 2, no: 0, options: null },
        }));
        const tally = await client(mock).castVote("act-000001", true);
        expect(tally.yes).toBe(2);
        expect(mock.calls).toHaveLength(1);
        expect(mock.calls[0].body).toEqual({ value: true });
    });

    it("maps error bodies onto ApiError", async () => {
        const mock = new MockApi().on("POST", /\/votes$/, () => ({
            status: 409,
            json: { code: "STALE_VOTE", message: "already decided" },
        }));
        await expect(client(mock).castVote("act-000001", true)).rejects.toSatisfy((err: unknown) => {
            return err instanceof ApiError && err.status === 409 && err.body.code === "STALE_VOTE";
        });
    });

    it("audit pages pass cursor and filters through", async () => {
        const mock = new MockApi().on("GET", /\/api\/v1\/audit$/, (call) => {
            expect(call.path).toContain("cursor=12");
            expect(call.path).toContain("kind=Decision");
            return { json: { events: [], next_cursor: null } };
        });
        await client(mock).audit({ cursor: "12", kind: "Decision" });
        expect(mock.calls).toHaveLength(1);
    });

    it("lint posts the source and returns diagnostics", async () => {
        const mock = new MockApi().on("POST", /\/api\/v1\/policies\/lint$/, () => ({
            json: {
                ok: false,
                diagnostics: [{ severity: "error", code: "SYNTAX_ERROR", message: "expected `{`", line: 1, col: 12 }],
                description: "",
                trial_mode: false,
            },
        }));
        const lint = await client(mock).lintPolicy("def filter(");
        expect(lint.ok).toBe(false);
        expect(lint.diagnostics[0].line).toBe(1);
    });

    it("document PUT wraps a governance proposal", async () => {
        const mock = new MockApi().on("PUT", /\/api\/v1\/documents\/doc-0001$/, () => ({
            json: { action: actionResource({ action_type: "document_edit" }) },
        }));
        const result = await client(mock).putDocument("doc-0001", { body: "updated" });
        expect(result.action.action_type).toBe("document_edit");
    });
});

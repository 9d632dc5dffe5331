// Scripted fetch double: routes requests to canned handlers and records the
// traffic so tests can assert exactly which documented endpoints were hit.

export interface RecordedCall {
    method: string;
    path: string;
    body: unknown;
}

type Handler = (call: RecordedCall) => { status?: number; json: unknown };

export class MockApi {
    calls: RecordedCall[] = [];
    private routes: { method: string; pattern: RegExp; handler: Handler }[] = [];

    on(method: string, pattern: RegExp, handler: Handler): this {
        this.routes.push({ method, pattern, handler });
        return this;
    }

    fetch = async (input: string, init?: RequestInit): Promise<Response> => {
        const method = init?.method ?? "GET";
        const url = new URL(input, "http://test.local");
        const path = url.pathname + url.search;
        const body = init?.body ? JSON.parse(init.body as string) : undefined;
        const call: RecordedCall = { method, path, body };
        this.calls.push(call);
        for (const route of this.routes) {
            if (route.method === method && route.pattern.test(url.pathname)) {
                const result = route.handler(call);
                return new Response(JSON.stringify(result.json), {
                    status: result.status ?? 200,
                    headers: { "Content-Type": "application/json" },
                });
            }
        }
        return new Response(JSON.stringify({ code: "NOT_FOUND", message: `no route for ${method} ${path}` }), {
            status: 404,
        });
    };

    callsTo(method: string, pathPrefix: string): RecordedCall[] {
        return this.calls.filter((c) => c.method === method && c.path.startsWith(pathPrefix));
    }
}

export function actionResource(overrides: Partial<Record<string, unknown>> = {}) {
    return {
        id: "act-000001",
        action_type: "rename_channel",
        layer: "platform",
        origin: "web_proposal",
        initiator: "usr-0001",
        payload: { old: "general", new: "lounge" },
        status: "PROPOSED",
        created_at: "2020-01-01T00:00:00.000000Z",
        decided_at: null,
        governing_policy: "pol-0002",
        datetime_trigger: null,
        bundle_kind: null,
        member_ids: [],
        parent_bundle: null,
        data: {},
        tally: { kind: "boolean", status: "PROPOSED", voters: 1, yes: 1, no: 0, options: null },
        ...overrides,
    };
}

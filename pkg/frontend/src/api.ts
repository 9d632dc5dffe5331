// Typed REST client. The UI holds no authority of its own: every mutation is
// exactly one call to a documented endpoint, and reads render whatever the
// server returned.

import {
    ActionResource,
    ActionTypeResource,
    ApiError,
    AuditPage,
    DocumentResource,
    LintResponse,
    PolicyResource,
    Tally,
    WhoAmI,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

// The documented API surface this client is allowed to touch. The parity
// tests assert that each UI mutation hits exactly one of these.
export const ENDPOINTS = {
    community: "GET /api/v1/community",
    whoami: "GET /api/v1/whoami",
    actionTypes: "GET /api/v1/action-types",
    listActions: "GET /api/v1/actions",
    proposeAction: "POST /api/v1/actions",
    getAction: "GET /api/v1/actions/{id}",
    waitAction: "GET /api/v1/actions/{id}/wait",
    castVote: "POST /api/v1/actions/{id}/votes",
    listPolicies: "GET /api/v1/policies",
    getPolicy: "GET /api/v1/policies/{id}",
    lintPolicy: "POST /api/v1/policies/lint",
    listDocuments: "GET /api/v1/documents",
    putDocument: "PUT /api/v1/documents/{id}",
    audit: "GET /api/v1/audit",
} as const;

export interface ProposeRequest {
    action_type: string;
    payload: Record<string, unknown>;
    members?: { action_type: string; payload: Record<string, unknown> }[];
    datetime_trigger?: string;
}

export class ApiClient {
    constructor(
        private baseUrl: string,
        private token: string,
        private fetchImpl: FetchLike = (input, init) => fetch(input, init),
    ) {}

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const init: RequestInit = {
            method,
            headers: {
                Authorization: `Bearer ${this.token}`,
                ...(body === undefined ? {} : { "Content-Type": "application/json" }),
            },
            ...(body === undefined ? {} : { body: JSON.stringify(body) }),
        };
        const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
        if (!response.ok) {
            let parsed;
            try {
                parsed = await response.json();
            } catch {
                parsed = { code: "HTTP_" + response.status, message: response.statusText };
            }
            throw new ApiError(response.status, parsed);
        }
        return (await response.json()) as T;
    }

    whoami(): Promise<WhoAmI> {
        return this.request("GET", "/api/v1/whoami");
    }

    actionTypes(): Promise<ActionTypeResource[]> {
        return this.request("GET", "/api/v1/action-types");
    }

    listActions(params?: { status?: string }): Promise<ActionResource[]> {
        const query = params?.status ? `?status=${encodeURIComponent(params.status)}` : "";
        return this.request("GET", `/api/v1/actions${query}`);
    }

    proposeAction(body: ProposeRequest): Promise<{ action: ActionResource }> {
        return this.request("POST", "/api/v1/actions", body);
    }

    getAction(id: string): Promise<ActionResource> {
        return this.request("GET", `/api/v1/actions/${id}`);
    }

    waitAction(id: string, timeoutSeconds = 25): Promise<ActionResource> {
        return this.request("GET", `/api/v1/actions/${id}/wait?timeout=${timeoutSeconds}`);
    }

    castVote(id: string, value: boolean | number): Promise<Tally> {
        return this.request("POST", `/api/v1/actions/${id}/votes`, { value });
    }

    listPolicies(): Promise<PolicyResource[]> {
        return this.request("GET", "/api/v1/policies");
    }

    getPolicy(id: string): Promise<PolicyResource> {
        return this.request("GET", `/api/v1/policies/${id}`);
    }

    lintPolicy(source: string): Promise<LintResponse> {
        return this.request("POST", "/api/v1/policies/lint", { source });
    }

    listDocuments(): Promise<DocumentResource[]> {
        return this.request("GET", "/api/v1/documents");
    }

    putDocument(id: string, body: { body: string; title?: string }): Promise<{ action: ActionResource }> {
        return this.request("PUT", `/api/v1/documents/${id}`, body);
    }

    audit(params: { cursor?: string | null; kind?: string; limit?: number } = {}): Promise<AuditPage> {
        const query = new URLSearchParams();
        if (params.cursor) query.set("cursor", params.cursor);
        if (params.kind) query.set("kind", params.kind);
        if (params.limit) query.set("limit", String(params.limit));
        const suffix = query.toString() ? `?${query}` : "";
        return this.request("GET", `/api/v1/audit${suffix}`);
    }
}

// Resource shapes returned by the REST API (/api/v1).

export interface Tally {
    kind: "boolean" | "choice";
    status: string;
    voters: number;
    yes?: number | null;
    no?: number | null;
    options?: Record<string, number> | null;
}

export interface ActionResource {
    id: string;
    action_type: string;
    layer: "platform" | "constitution";
    origin: string;
    initiator: string;
    payload: Record<string, unknown>;
    status: "PROPOSED" | "PASSED" | "FAILED";
    created_at: string;
    decided_at: string | null;
    governing_policy: string | null;
    datetime_trigger: string | null;
    bundle_kind: "election" | "combination" | null;
    member_ids: string[];
    parent_bundle: string | null;
    data: Record<string, unknown>;
    tally: Tally;
}

export interface PolicyStageResource {
    id: string;
    source: string;
    description: string;
    data: Record<string, unknown>;
}

export interface PolicyResource {
    id: string;
    layer: string;
    description: string;
    precedence: number;
    enacted_at: string;
    trial_mode: boolean;
    source: string;
    stages: PolicyStageResource[];
}

export interface DocumentResource {
    id: string;
    title: string;
    body: string;
    version: number;
}

export interface AuditEvent {
    offset: number;
    ts: string;
    kind: string;
    deciding_policy: string | null;
    payload: Record<string, any>;
}

export interface AuditPage {
    events: AuditEvent[];
    next_cursor: string | null;
}

export interface ActionTypeResource {
    name: string;
    layer: string;
    payload_schema: Record<string, any>;
    can_propose: boolean;
    can_view: boolean;
}

export interface MemberResource {
    id: string;
    display_name: string;
    platform_handle: string;
    roles: string[];
}

export interface WhoAmI {
    user: MemberResource;
    scopes: string[];
}

export interface LintDiagnostic {
    severity: "error" | "info";
    code: string;
    message: string;
    line?: number | null;
    col?: number | null;
}

export interface LintResponse {
    ok: boolean;
    diagnostics: LintDiagnostic[];
    description: string;
    trial_mode: boolean;
}

export interface ApiErrorBody {
    code: string;
    message: string;
    field_errors?: { field: string; message: string }[];
}

export class ApiError extends Error {
    constructor(
        public status: number,
        public body: ApiErrorBody,
    ) {
        super(`${body.code}: ${body.message}`);
    }
}

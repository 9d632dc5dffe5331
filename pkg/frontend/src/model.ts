// View-model logic, kept free of DOM so it can be tested directly.

import {
    ActionResource,
    ActionTypeResource,
    AuditEvent,
    LintResponse,
    PolicyResource,
    Tally,
    WhoAmI,
} from "./types.js";

// --- dashboard panes ---------------------------------------------------------

export interface CatalogEntry {
    name: string;
    layer: string;
    schema: Record<string, any>;
}

// Left pane: only action types the member may propose render at all.
export function proposableCatalog(types: ActionTypeResource[]): CatalogEntry[] {
    return types
        .filter((t) => t.can_propose)
        .map((t) => ({ name: t.name, layer: t.layer, schema: t.payload_schema }));
}

export interface PolicyCard {
    id: string;
    description: string;
    layer: string;
    precedence: number;
    trialBadge: boolean;
    stages: number;
}

export function policyCards(policies: PolicyResource[]): PolicyCard[] {
    return policies.map((p) => ({
        id: p.id,
        description: p.description || "(no description)",
        layer: p.layer,
        precedence: p.precedence,
        trialBadge: p.trial_mode,
        stages: p.stages.length,
    }));
}

export interface FeedLine {
    offset: number;
    ts: string;
    text: string;
}

export function auditFeedLines(events: AuditEvent[]): FeedLine[] {
    return events.map((e) => ({ offset: e.offset, ts: e.ts, text: describeEvent(e) }));
}

export function describeEvent(event: AuditEvent): string {
    const p = event.payload;
    switch (event.kind) {
        case "ActionProposed":
            return `${p.action?.action_type ?? "action"} proposed (${p.action?.id})`;
        case "VoteCast":
            return `vote on ${p.action}: ${String(p.value)}`;
        case "Decision": {
            const by = p.policy ? ` by ${p.policy}` : ` (${p.reason})`;
            const trial = p.trial ? " [trial]" : "";
            return `${p.action} ${p.disposition}${by}${trial}`;
        }
        case "TrialDisposition":
            return `${p.action} would have ${p.would} under ${p.policy}`;
        case "PolicyEnacted":
            return `policy ${p.policy?.id ?? ""} enacted`;
        case "PolicyRetired":
            return `policy ${p.policy} retired`;
        case "ActionExecuted":
            return `${p.action} executed`;
        case "ActionReverted":
            return `${p.action} reverted (${p.reason ?? ""})`;
        case "PolicyFunctionError":
            return `policy ${p.policy} ${p.function}() error: ${p.code}`;
        default:
            return event.kind;
    }
}

// --- vote inbox --------------------------------------------------------------

export interface InboxItem {
    actionId: string;
    actionType: string;
    summary: string;
    kind: "boolean" | "choice";
    options: string[]; // labels for choice votes, [] for boolean
    tally: Tally;
    decided: boolean;
    myActions: boolean;
}

export function voteInbox(actions: ActionResource[], me: WhoAmI): InboxItem[] {
    return actions
        .filter((a) => a.parent_bundle === null)
        .filter((a) => a.status === "PROPOSED")
        .map((a) => ({
            actionId: a.id,
            actionType: a.action_type,
            summary: summarize(a),
            kind: a.bundle_kind === "election" ? "choice" : "boolean",
            options: a.bundle_kind === "election" ? a.member_ids : [],
            tally: a.tally,
            decided: false,
            myActions: a.initiator === me.user.id,
        }));
}

function summarize(action: ActionResource): string {
    const interesting = ["old", "new", "channel", "text", "title", "office", "role", "user"]
        .map((k) => action.payload[k])
        .filter((v) => typeof v === "string") as string[];
    return interesting.length ? `${action.action_type}: ${interesting.join(" → ")}` : action.action_type;
}

// Optimistic update: bump the tally locally, then reconcile with whatever the
// server returned (the server wins).
export function optimisticTally(current: Tally, value: boolean | number): Tally {
    const next: Tally = JSON.parse(JSON.stringify(current));
    next.voters += 1;
    if (typeof value === "boolean") {
        if (value) next.yes = (next.yes ?? 0) + 1;
        else next.no = (next.no ?? 0) + 1;
    } else if (next.options) {
        const key = String(value);
        next.options[key] = (next.options[key] ?? 0) + 1;
    }
    return next;
}

export function reconcileTally(_optimistic: Tally, server: Tally): Tally {
    return server;
}

// --- policy editor -----------------------------------------------------------

export interface EditorState {
    source: string;
    description: string;
    precedence: number;
    trialHint: boolean;
    diagnostics: { line: number | null; message: string; severity: string }[];
    clean: boolean;
}

export function editorStateFromLint(source: string, precedence: number, lint: LintResponse): EditorState {
    return {
        source,
        description: lint.description,
        precedence,
        trialHint: lint.trial_mode,
        diagnostics: lint.diagnostics.map((d) => ({
            line: d.line ?? null,
            message: d.code + ": " + d.message,
            severity: d.severity,
        })),
        clean: lint.ok,
    };
}

// Inline rendering of a 422 proposal rejection: field errors map onto the
// editor's diagnostics list, keeping line/col references when present.
export function diagnosticsFromFieldErrors(errors: { field: string; message: string }[]): EditorState["diagnostics"] {
    return errors.map((e) => {
        const match = e.message.match(/^(\d+):(\d+):/);
        return {
            line: match ? parseInt(match[1], 10) : null,
            message: `${e.field}: ${e.message}`,
            severity: "error",
        };
    });
}

// Dashboard wiring. Three panes: proposable actions on the left, enacted
// policies in the middle, the audit feed on the right, with a vote inbox and
// a policy editor. All state lives on the server; this file only renders.

import { ApiClient } from "./api.js";
import { toHtml } from "./highlight.js";
import {
    auditFeedLines,
    diagnosticsFromFieldErrors,
    editorStateFromLint,
    optimisticTally,
    policyCards,
    proposableCatalog,
    reconcileTally,
    voteInbox,
} from "./model.js";
import { AuditPoller, followDecision } from "./poll.js";
import { ActionTypeResource, ApiError, Tally, WhoAmI } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
        if (key === "class") node.className = value;
        else node.setAttribute(key, value);
    }
    node.append(...children);
    return node;
}

function toast(text: string): void {
    const box = document.getElementById("toasts")!;
    const note = el("div", { class: "toast" }, text);
    box.append(note);
    setTimeout(() => note.remove(), 6000);
}

function tallyText(tally: Tally): string {
    if (tally.kind === "choice") {
        const counts = Object.entries(tally.options ?? {})
            .map(([option, count]) => `#${option}: ${count}`)
            .join("  ");
        return `${counts} (${tally.voters} voters)`;
    }
    return `yes ${tally.yes ?? 0} / no ${tally.no ?? 0}`;
}

export class Dashboard {
    private me!: WhoAmI;
    private types: ActionTypeResource[] = [];

    constructor(private client: ApiClient) {}

    async start(): Promise<void> {
        this.me = await this.client.whoami();
        document.getElementById("who")!.textContent =
            `${this.me.user.display_name} (${this.me.user.roles.join(", ")})`;
        this.types = await this.client.actionTypes();
        this.renderCatalog();
        await Promise.all([this.renderPolicies(), this.renderInbox(), this.renderDocuments()]);
        const poller = new AuditPoller(this.client, (events) => {
            const feed = document.getElementById("feed")!;
            for (const line of auditFeedLines(events)) {
                feed.prepend(el("div", { class: "feed-line" }, `${line.ts}  ${line.text}`));
            }
            void this.renderInbox();
        });
        poller.start();
        this.wireEditor();
    }

    private renderCatalog(): void {
        const pane = document.getElementById("catalog")!;
        pane.replaceChildren();
        for (const entry of proposableCatalog(this.types)) {
            const button = el("button", { class: "catalog-entry" }, `${entry.name} (${entry.layer})`);
            button.addEventListener("click", () => this.openProposalForm(entry.name, entry.schema));
            pane.append(button);
        }
    }

    private openProposalForm(actionType: string, schema: Record<string, any>): void {
        const pane = document.getElementById("form-pane")!;
        pane.replaceChildren(el("h3", {}, `Propose ${actionType}`));
        const fields: Record<string, HTMLInputElement> = {};
        const properties: Record<string, any> = schema.properties ?? {};
        const required: string[] = schema.required ?? [];
        const names = Object.keys(properties).length
            ? Object.keys(properties)
            : required;
        for (const name of names) {
            const input = el("input", { placeholder: name, "data-field": name });
            fields[name] = input;
            pane.append(el("label", {}, `${name}${required.includes(name) ? " *" : ""}`, input));
        }
        const errors = el("div", { class: "field-errors" });
        const submit = el("button", {}, "Propose");
        submit.addEventListener("click", async () => {
            const payload: Record<string, unknown> = {};
            for (const [name, input] of Object.entries(fields)) {
                if (input.value === "") continue;
                const spec = properties[name] ?? {};
                payload[name] =
                    spec.type === "integer" ? parseInt(input.value, 10)
                    : spec.type === "boolean" ? input.value === "true"
                    : spec.type === "array" || spec.type === "object" ? JSON.parse(input.value)
                    : input.value;
            }
            errors.replaceChildren();
            try {
                const { action } = await this.client.proposeAction({ action_type: actionType, payload });
                toast(`proposed ${action.id}: ${action.status}`);
                void followDecision(this.client, action.id, (a) =>
                    toast(`${a.id} is ${a.status}`),
                );
            } catch (err) {
                if (err instanceof ApiError && err.body.field_errors) {
                    for (const fieldError of err.body.field_errors) {
                        errors.append(el("div", { class: "error" }, `${fieldError.field}: ${fieldError.message}`));
                    }
                } else {
                    toast(String(err));
                }
            }
        });
        pane.append(errors, submit);
    }

    private async renderPolicies(): Promise<void> {
        const pane = document.getElementById("policies")!;
        const policies = await this.client.listPolicies();
        pane.replaceChildren();
        for (const card of policyCards(policies)) {
            const node = el(
                "div",
                { class: "policy-card" },
                el("strong", {}, card.description),
                el("span", { class: "meta" },
                    ` ${card.layer} · precedence ${card.precedence}` +
                    (card.stages > 1 ? ` · ${card.stages} stages` : "")),
            );
            if (card.trialBadge) node.append(el("span", { class: "badge" }, "trial mode"));
            node.addEventListener("click", async () => {
                const policy = await this.client.getPolicy(card.id);
                const viewer = document.getElementById("source-view")!;
                viewer.innerHTML = toHtml(policy.stages.map((s) => s.source).join("\n\n"));
            });
            pane.append(node);
        }
    }

    private async renderDocuments(): Promise<void> {
        const pane = document.getElementById("documents")!;
        const docs = await this.client.listDocuments();
        pane.replaceChildren();
        for (const doc of docs) {
            pane.append(el("div", { class: "doc" },
                el("strong", {}, `${doc.title} (v${doc.version})`),
                el("pre", {}, doc.body)));
        }
    }

    private async renderInbox(): Promise<void> {
        const pane = document.getElementById("inbox")!;
        const actions = await this.client.listActions({ status: "PROPOSED" });
        pane.replaceChildren();
        for (const item of voteInbox(actions, this.me)) {
            const tally = el("span", { class: "tally" }, tallyText(item.tally));
            const card = el("div", { class: "inbox-card" },
                el("div", {}, item.summary), tally);
            const vote = async (value: boolean | number) => {
                tally.textContent = tallyText(optimisticTally(item.tally, value));
                try {
                    const server = await this.client.castVote(item.actionId, value);
                    tally.textContent = tallyText(reconcileTally(item.tally, server));
                    if (server.status !== "PROPOSED") card.classList.add("decided");
                } catch (err) {
                    if (err instanceof ApiError && err.status === 409) {
                        card.classList.add("decided");
                        tally.textContent = "already decided";
                    } else {
                        toast(String(err));
                    }
                }
            };
            if (item.kind === "boolean") {
                const yes = el("button", {}, "yes");
                const no = el("button", {}, "no");
                yes.addEventListener("click", () => void vote(true));
                no.addEventListener("click", () => void vote(false));
                card.append(yes, no);
            } else {
                item.options.forEach((_, index) => {
                    const button = el("button", {}, String(index + 1));
                    button.addEventListener("click", () => void vote(index + 1));
                    card.append(button);
                });
            }
            pane.append(card);
        }
    }

    private wireEditor(): void {
        const source = document.getElementById("editor-source") as HTMLTextAreaElement;
        const precedence = document.getElementById("editor-precedence") as HTMLInputElement;
        const layer = document.getElementById("editor-layer") as HTMLSelectElement;
        const diagnostics = document.getElementById("editor-diagnostics")!;
        const hint = document.getElementById("editor-hint")!;
        const preview = document.getElementById("editor-preview")!;

        const lint = async () => {
            preview.innerHTML = toHtml(source.value);
            const response = await this.client.lintPolicy(source.value);
            const state = editorStateFromLint(source.value, parseInt(precedence.value || "0", 10), response);
            hint.textContent = state.trialHint ? "trial mode: empty pass()/fail(), no effects will apply" : "";
            diagnostics.replaceChildren(
                ...state.diagnostics.map((d) =>
                    el("div", { class: `diag ${d.severity}` },
                        d.line === null ? d.message : `line ${d.line}: ${d.message}`)),
            );
            return state.clean;
        };
        document.getElementById("editor-lint")!.addEventListener("click", () => void lint());
        document.getElementById("editor-submit")!.addEventListener("click", async () => {
            try {
                const { action } = await this.client.proposeAction({
                    action_type: "policy_add",
                    payload: {
                        source: source.value,
                        layer: layer.value,
                        precedence: parseInt(precedence.value || "0", 10),
                    },
                });
                toast(`policy proposal ${action.id}: ${action.status}`);
                void followDecision(this.client, action.id, (a) => toast(`${a.id} is ${a.status}`));
            } catch (err) {
                if (err instanceof ApiError && err.body.field_errors) {
                    diagnostics.replaceChildren(
                        ...diagnosticsFromFieldErrors(err.body.field_errors).map((d) =>
                            el("div", { class: "diag error" },
                                d.line === null ? d.message : `line ${d.line}: ${d.message}`)),
                    );
                } else {
                    toast(String(err));
                }
            }
        });
    }
}

export function boot(): void {
    const params = new URLSearchParams(window.location.search);
    const base = params.get("base") ?? localStorage.getItem("govkit-base") ?? "";
    const token = params.get("token") ?? localStorage.getItem("govkit-token") ?? "";
    if (!token) {
        document.body.textContent = "supply ?token=... (and optionally ?base=...) to sign in";
        return;
    }
    localStorage.setItem("govkit-base", base);
    localStorage.setItem("govkit-token", token);
    void new Dashboard(new ApiClient(base, token)).start();
}

if (typeof document !== "undefined" && document.getElementById("catalog")) {
    boot();
}

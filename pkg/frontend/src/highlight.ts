// Minimal syntax highlighter for the policy grammar: tokenizes a source line
// into typed spans the editor can color. Line-by-line, no cross-line state
// (the grammar has no multi-line strings).

export type SpanType = "keyword" | "builtin" | "string" | "number" | "comment" | "op" | "name" | "space";

export interface Span {
    type: SpanType;
    text: string;
}

const KEYWORDS = new Set([
    "def", "if", "elif", "else", "for", "in", "return", "and", "or", "not", "true", "false", "none",
]);

const BUILTINS = new Set([
    "PASSED", "FAILED", "PROPOSED",
    "action", "policy", "proposal", "bundle", "users", "roles", "documents", "policies",
    "notify_users", "random_sample", "now", "days", "hours", "minutes", "http_fetch",
    "propose_action", "log", "len", "str", "append", "contains", "keys", "get",
]);

const NAME_START = /[A-Za-z_]/;
const NAME_PART = /[A-Za-z0-9_]/;
const DIGIT = /[0-9]/;

export function highlightLine(line: string): Span[] {
    const spans: Span[] = [];
    let i = 0;
    const push = (type: SpanType, text: string) => {
        if (text) spans.push({ type, text });
    };
    while (i < line.length) {
        const ch = line[i];
        if (ch === "#") {
            push("comment", line.slice(i));
            break;
        }
        if (ch === '"') {
            let j = i + 1;
            while (j < line.length && line[j] !== '"') {
                if (line[j] === "\\") j++;
                j++;
            }
            j = Math.min(j + 1, line.length);
            push("string", line.slice(i, j));
            i = j;
            continue;
        }
        if (NAME_START.test(ch)) {
            let j = i;
            while (j < line.length && NAME_PART.test(line[j])) j++;
            const word = line.slice(i, j);
            push(KEYWORDS.has(word) ? "keyword" : BUILTINS.has(word) ? "builtin" : "name", word);
            i = j;
            continue;
        }
        if (DIGIT.test(ch)) {
            let j = i;
            while (j < line.length && (DIGIT.test(line[j]) || line[j] === ".")) j++;
            push("number", line.slice(i, j));
            i = j;
            continue;
        }
        if (ch === " " || ch === "\t") {
            let j = i;
            while (j < line.length && (line[j] === " " || line[j] === "\t")) j++;
            push("space", line.slice(i, j));
            i = j;
            continue;
        }
        push("op", ch);
        i += 1;
    }
    return spans;
}

export function highlightSource(source: string): Span[][] {
    return source.split("\n").map(highlightLine);
}

export function toHtml(source: string): string {
    const escape = (s: string) =>
        s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
    return highlightSource(source)
        .map((line) =>
            line.map((span) => `<span class="tok-${span.type}">${escape(span.text)}</span>`).join(""),
        )
        .join("\n");
}

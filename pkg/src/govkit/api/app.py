"""FastAPI application wrapping the engine.

Handlers are stateless: every mutation goes through the engine's submit/vote
paths and reads hit the current state snapshot. Engine error codes map 1:1
onto HTTP responses.
"""

from __future__ import annotations

import secrets
from pathlib import Path

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse

from .. import constitution
from ..adapters.base import get_adapter
from ..adapters.webhook import verify_signature
from ..clock import REAL, Clock
from ..engine import Engine
from ..errors import (
    BadSignatureError,
    ConflictError,
    ForbiddenError,
    GovkitError,
    InvalidInputError,
    NotFoundError,
    UnauthorizedError,
)
from ..fetch import HttpFetcher
from ..model import PROPOSE, VIEW, check_permission, user_roles
from ..store import EventLog
from . import schemas

API_PREFIX = "/api/v1"

# Every route that mutates state, kept in one place so tests can audit that
# no other mutation path exists.
MUTATING_ROUTES = {
    ("POST", f"{API_PREFIX}/communities"),
    ("POST", f"{API_PREFIX}/actions"),
    ("POST", f"{API_PREFIX}/actions/{{action_id}}/votes"),
    ("PUT", f"{API_PREFIX}/documents/{{document_id}}"),
    ("POST", f"{API_PREFIX}/adapters/{{platform}}/events"),
    ("POST", f"{API_PREFIX}/policies/lint"),  # pure computation, no state
}


def create_app(
    engine: Engine | None,
    *,
    data_dir: str | Path | None = None,
    install_token: str | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="govkit", version="1.0")
    app.state.engine = engine
    app.state.data_dir = Path(data_dir) if data_dir else None
    app.state.install_token = install_token or secrets.token_hex(16)

    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["Authorization", "Content-Type", "Idempotency-Key", "X-Signature"],
    )

    @app.exception_handler(GovkitError)
    async def govkit_error_handler(request: Request, err: GovkitError):
        return JSONResponse(status_code=err.http_status, content=err.to_dict())

    def engine_or_404() -> Engine:
        if app.state.engine is None:
            raise NotFoundError("community not bootstrapped yet")
        return app.state.engine

    def current_user(authorization: str = Header(default="")) -> dict:
        eng = engine_or_404()
        token = authorization.removeprefix("Bearer ").strip()
        if not token:
            raise UnauthorizedError("missing bearer token")
        entry = eng.state.tokens.get(token)
        if entry is None:
            raise UnauthorizedError("invalid token")
        return entry

    def require_view(eng: Engine, user: dict, action_type: str) -> None:
        if not check_permission(eng.state.community, user["user"], VIEW, action_type):
            raise ForbiddenError(f"requires view permission on {action_type}")

    # -- install ------------------------------------------------------------

    @app.post(f"{API_PREFIX}/communities", response_model=schemas.BootstrapResponse, status_code=201)
    def bootstrap_community(body: schemas.BootstrapRequest, authorization: str = Header(default="")):
        if app.state.engine is not None:
            raise ConflictError("a community already exists on this server")
        token = authorization.removeprefix("Bearer ").strip()
        if token != app.state.install_token:
            raise UnauthorizedError("install token required")
        if app.state.data_dir is not None:
            app.state.data_dir.mkdir(parents=True, exist_ok=True)
            log = EventLog(app.state.data_dir / "events.jsonl")
        else:
            log = EventLog()
        adapter = get_adapter("sandbox")()
        eng = Engine.bootstrap(
            name=body.name,
            members=[(m["name"], m.get("handle", f"@{m['name']}")) for m in body.members],
            seed=body.seed,
            log=log,
            adapter=adapter,
            clock=Clock(REAL),
            fetcher=HttpFetcher(),
            roles=body.roles,
            config=body.config,
        )
        app.state.engine = eng
        tokens = {entry["user"]: tok for tok, entry in eng.state.tokens.items()}
        admin = next(tok for tok, entry in eng.state.tokens.items() if "admin-install" in entry["scopes"])
        return schemas.BootstrapResponse(community=eng.state.community.id, admin_token=admin, tokens=tokens)

    # -- community ------------------------------------------------------------

    def member_resource(eng: Engine, user_id: str) -> schemas.MemberResource:
        user = eng.state.community.members[user_id]
        return schemas.MemberResource(
            id=user.id,
            display_name=user.display_name,
            platform_handle=user.platform_handle,
            roles=[r.name for r in user_roles(eng.state.community, user.id)],
        )

    @app.get(f"{API_PREFIX}/community", response_model=schemas.CommunityResource)
    def get_community(user: dict = Depends(current_user)):
        eng = engine_or_404()
        community = eng.state.community
        return schemas.CommunityResource(
            id=community.id,
            name=community.name,
            members=[member_resource(eng, uid) for uid in community.member_ids()],
            action_types=community.action_types,
            adapter=community.adapter,
            external_calls_enabled=community.external_calls_enabled,
            config=eng.state.config,
        )

    @app.get(f"{API_PREFIX}/whoami", response_model=schemas.WhoAmI)
    def whoami(user: dict = Depends(current_user)):
        eng = engine_or_404()
        return schemas.WhoAmI(user=member_resource(eng, user["user"]), scopes=user["scopes"])

    @app.get(f"{API_PREFIX}/action-types", response_model=list[schemas.ActionTypeResource])
    def action_types(user: dict = Depends(current_user)):
        eng = engine_or_404()
        community = eng.state.community
        adapter_types = eng.adapter.action_types()
        out = []
        for name in community.action_types:
            if name in constitution.CATALOG:
                layer, schema = "constitution", constitution.payload_schemas()[name]
            elif name in adapter_types:
                layer = "platform"
                schema = {
                    "type": "object",
                    "required": adapter_types[name].get("required", []),
                }
            else:
                layer = "constitution" if name.endswith("_bundle") else "platform"
                schema = {"type": "object"}
            out.append(
                schemas.ActionTypeResource(
                    name=name,
                    layer=layer,
                    payload_schema=schema,
                    can_propose=check_permission(community, user["user"], PROPOSE, name),
                    can_view=check_permission(community, user["user"], VIEW, name),
                )
            )
        return out

    # -- actions --------------------------------------------------------------

    def action_resource(eng: Engine, action_id: str) -> schemas.ActionResource:
        with eng.lock:
            rec = eng.get_action(action_id)
            return schemas.ActionResource.from_record(rec, eng.tally(action_id))

    @app.get(f"{API_PREFIX}/actions", response_model=list[schemas.ActionResource])
    def list_actions(
        status: str | None = Query(default=None),
        action_type: str | None = Query(default=None),
        user: dict = Depends(current_user),
    ):
        eng = engine_or_404()
        out = []
        with eng.lock:
            for aid, rec in list(eng.state.actions.items()):
                if status and rec.proposal.status != status:
                    continue
                if action_type and rec.action_type != action_type:
                    continue
                if not check_permission(eng.state.community, user["user"], VIEW, rec.action_type):
                    continue
                out.append(action_resource(eng, aid))
        return out

    @app.post(f"{API_PREFIX}/actions", response_model=schemas.ProposalAccepted, status_code=202)
    def propose_action(
        body: schemas.ProposeActionRequest,
        user: dict = Depends(current_user),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        eng = engine_or_404()
        if body.action_type not in eng.state.community.action_types:
            raise InvalidInputError(f"unknown action type: {body.action_type}")
        if not check_permission(eng.state.community, user["user"], PROPOSE, body.action_type):
            raise ForbiddenError(f"requires propose permission on {body.action_type}")
        aid = eng.submit_action(
            user["user"],
            body.action_type,
            body.payload,
            members=[m.to_engine() for m in body.members] if body.members else None,
            datetime_trigger=body.datetime_trigger,
            idempotency_key=idempotency_key,
        )
        return schemas.ProposalAccepted(action=action_resource(eng, aid))

    @app.get(f"{API_PREFIX}/actions/{{action_id}}", response_model=schemas.ActionResource)
    def get_action(action_id: str, user: dict = Depends(current_user)):
        eng = engine_or_404()
        rec = eng.get_action(action_id)
        require_view(eng, user, rec.action_type)
        return action_resource(eng, action_id)

    @app.get(f"{API_PREFIX}/actions/{{action_id}}/wait", response_model=schemas.ActionResource)
    def wait_action(action_id: str, timeout: float = Query(default=25.0, le=60.0),
                    user: dict = Depends(current_user)):
        eng = engine_or_404()
        rec = eng.get_action(action_id)
        require_view(eng, user, rec.action_type)
        eng.wait_for_decision(action_id, timeout)
        return action_resource(eng, action_id)

    @app.post(f"{API_PREFIX}/actions/{{action_id}}/votes", response_model=schemas.TallyResource)
    def cast_vote(action_id: str, body: schemas.VoteRequest, user: dict = Depends(current_user)):
        eng = engine_or_404()
        tally = eng.cast_vote(user["user"], action_id, body.value)
        return schemas.TallyResource(**tally)

    # -- policies -------------------------------------------------------------

    @app.get(f"{API_PREFIX}/policies", response_model=list[schemas.PolicyResource])
    def list_policies(user: dict = Depends(current_user)):
        eng = engine_or_404()
        require_view(eng, user, "policy_add")
        with eng.lock:
            return [schemas.PolicyResource.from_record(p) for p in eng.state.policies]

    @app.get(f"{API_PREFIX}/policies/{{policy_id}}", response_model=schemas.PolicyResource)
    def get_policy(policy_id: str, user: dict = Depends(current_user)):
        eng = engine_or_404()
        require_view(eng, user, "policy_add")
        policy = eng.state.policy_by_id(policy_id)
        if policy is None:
            raise NotFoundError(f"no such policy: {policy_id}")
        return schemas.PolicyResource.from_record(policy)

    @app.post(f"{API_PREFIX}/policies/lint", response_model=schemas.LintResponse)
    def lint_policy(body: schemas.LintRequest, user: dict = Depends(current_user)):
        from ..lint import lint_source

        return schemas.LintResponse(**lint_source(body.source))

    # -- documents ------------------------------------------------------------

    @app.get(f"{API_PREFIX}/documents", response_model=list[schemas.DocumentResource])
    def list_documents(user: dict = Depends(current_user)):
        eng = engine_or_404()
        require_view(eng, user, "document_edit")
        return [
            schemas.DocumentResource(**doc.to_dict())
            for _, doc in sorted(eng.state.community.documents.items())
        ]

    @app.get(f"{API_PREFIX}/documents/{{document_id}}", response_model=schemas.DocumentResource)
    def get_document(document_id: str, user: dict = Depends(current_user)):
        eng = engine_or_404()
        require_view(eng, user, "document_edit")
        doc = eng.state.community.documents.get(document_id)
        if doc is None:
            raise NotFoundError(f"no such document: {document_id}")
        return schemas.DocumentResource(**doc.to_dict())

    @app.put(f"{API_PREFIX}/documents/{{document_id}}", response_model=schemas.ProposalAccepted, status_code=202)
    def put_document(document_id: str, body: schemas.DocumentPutRequest, user: dict = Depends(current_user)):
        eng = engine_or_404()
        if not check_permission(eng.state.community, user["user"], PROPOSE, "document_edit"):
            raise ForbiddenError("requires propose permission on document_edit")
        payload = {"document": document_id, "body": body.body}
        if body.title is not None:
            payload["title"] = body.title
        aid = eng.submit_action(user["user"], "document_edit", payload)
        return schemas.ProposalAccepted(action=action_resource(eng, aid))

    # -- audit ----------------------------------------------------------------

    @app.get(f"{API_PREFIX}/audit", response_model=schemas.AuditPage)
    def audit(
        kind: str | None = None,
        action: str | None = None,
        policy: str | None = None,
        since: str | None = None,
        until: str | None = None,
        cursor: str | None = None,
        limit: int = Query(default=100, ge=1, le=1000),
        user: dict = Depends(current_user),
    ):
        eng = engine_or_404()
        page = eng.audit(
            kind=kind, action_id=action, policy_id=policy, since=since, until=until,
            cursor=cursor, limit=limit,
        )
        return schemas.AuditPage(
            events=[
                schemas.AuditEvent(
                    offset=e["offset"], ts=e["ts"], kind=e["kind"],
                    deciding_policy=e["deciding_policy"], payload=e["payload"],
                )
                for e in page["events"]
            ],
            next_cursor=page["next_cursor"],
        )

    # -- adapter ingress --------------------------------------------------------

    @app.post(f"{API_PREFIX}/adapters/{{platform}}/events", status_code=202)
    async def adapter_event(platform: str, request: Request):
        eng = engine_or_404()
        if platform != eng.adapter.name:
            raise NotFoundError(f"no adapter named {platform!r} bound to this community")
        raw = await request.body()
        secret = getattr(eng.adapter, "secret", "")
        signature = request.headers.get("X-Signature", "")
        if secret:
            if not verify_signature(secret, raw, signature):
                raise BadSignatureError("invalid event signature")
        else:
            token = request.headers.get("Authorization", "").removeprefix("Bearer ").strip()
            if token not in eng.state.tokens:
                raise UnauthorizedError("adapter events need a signature or a member token")
        import json

        try:
            body = schemas.AdapterEventRequest(**json.loads(raw))
        except Exception as err:
            raise InvalidInputError(f"malformed event envelope: {err}") from None
        aid = eng.ingest_platform_event(
            {"event_id": body.event_id, "actor_handle": body.actor_handle,
             "type": body.type, "payload": body.payload}
        )
        return {"action": aid, "accepted": aid is not None}

    if static_dir is not None and Path(static_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app

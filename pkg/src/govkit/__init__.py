"""govkit: a self-hostable governance engine for online communities.

Members author executable governance procedures in a sandboxed policy
language; the engine evaluates member-initiated actions against those
policies (votes, juries, elections, multi-stage procedures) and enforces
outcomes on a pluggable platform, with an append-only audit log that can
replay the full history. Governance of the governance itself runs through
the constitution layer.
"""

__version__ = "0.1.0"

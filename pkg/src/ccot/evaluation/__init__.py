from .metrics import MetricsReport, collision_rate, evaluate, l2_error, score_language, score_risk
from .mock import CannedEndpoint
from .oracle import oracle_respond
from .prompts import assemble_prompt
from .remote import Endpoint, query_batch, query_remote_model
from .schema import ParseStatus, ResponseRecord, parse_response, render_response

__all__ = [
    "CannedEndpoint", "Endpoint", "MetricsReport", "ParseStatus", "ResponseRecord", "assemble_prompt", "collision_rate", "evaluate",
    "l2_error", "oracle_respond", "parse_response", "query_batch", "query_remote_model", "render_response",
    "score_language", "score_risk",
]

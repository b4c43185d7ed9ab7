"""Client for a remote model speaking the JSON wire contract.

Request: ``POST {"sample_id": ..., "prompt": ...}``. Response (HTTP 200):
``{"sample_id": ..., "text": ...}``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import httpx

from ..errors import RemoteModelError, RemoteStatusError, RemoteTimeoutError, RemoteTransportError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Endpoint:
    url: str
    timeout: float = 120.0
    retries: int = 1


def query_remote_model(prompt: str, endpoint: Endpoint, sample_id: str = "",
                       client: httpx.Client | None = None) -> str:
    """Send one prompt and return the model text unmodified.

    Timeouts, transport failures and 5xx responses are retried ``retries`` times.
    """
    own = client is None
    client = client or httpx.Client()
    last: RemoteModelError | None = None
    try:
        for attempt in range(endpoint.retries + 1):
            try:
                resp = client.post(endpoint.url, json={"sample_id": sample_id, "prompt": prompt},
                                   timeout=endpoint.timeout)
            except httpx.TimeoutException as exc:
                last = RemoteTimeoutError(f"{sample_id}: timed out after {endpoint.timeout} s ({exc})")
            except httpx.TransportError as exc:
                last = RemoteTransportError(f"{sample_id}: {exc}")
            else:
                if resp.status_code == 200:
                    try:
                        body = resp.json()
                        text = body["text"]
                    except (ValueError, KeyError, TypeError) as exc:
                        raise RemoteTransportError(f"{sample_id}: bad response body ({exc})") from exc
                    if not isinstance(text, str):
                        raise RemoteTransportError(f"{sample_id}: response text is not a string")
                    return text
                last = RemoteStatusError(resp.status_code, resp.text)
                if resp.status_code < 500:
                    break
            logger.warning("attempt %d for %s failed: %s", attempt + 1, sample_id, last)
        raise last
    finally:
        if own:
            client.close()


def query_batch(prompts: Mapping[str, str], endpoint: Endpoint,
                max_in_flight: int = 4) -> dict[str, str | RemoteModelError]:
    """Query many prompts with bounded concurrency; failures come back as error values."""
    def one(item):
        sid, prompt = item
        try:
            return sid, query_remote_model(prompt, endpoint, sid, client)
        except RemoteModelError as exc:
            return sid, exc

    with httpx.Client() as client, ThreadPoolExecutor(max_in_flight) as pool:
        results = dict(pool.map(one, sorted(prompts.items())))
    return {sid: results[sid] for sid in sorted(results)}

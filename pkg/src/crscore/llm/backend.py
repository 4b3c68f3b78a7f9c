"""Chat-completion backend configuration and HTTP client.

The wire protocol is the prevailing chat-completion convention: POST a JSON
body of model, temperature, and a message list; read the completion text from
the first choice's message content. The API key comes from the environment
(CRSCORE_API_KEY) and travels as a bearer authorization header.

Any object with a ``complete(prompt) -> str`` method can stand in for the
HTTP backend; tests use in-process stubs and local servers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import httpx

from ..errors import (
    BackendError,
    BackendHttpError,
    BackendTimeoutError,
    ConfigInvalidError,
    ParseFailureError,
)

API_KEY_ENV_VAR = "CRSCORE_API_KEY"


@dataclass(frozen=True)
class BackendConfig:
    """Connection and behavior settings for a scoring backend.

    A temperature above 1.0 trades determinism for diversity, which is a
    strange choice for scoring; it is allowed only with an explicit
    justification that the run log then records.
    """

    endpoint: str
    model: str
    temperature: float = 0.0
    max_parallel: int = 4
    max_attempts: int = 3
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    timeout: float = 60.0
    temperature_justification: str | None = None

    def __post_init__(self) -> None:
        if not self.endpoint:
            raise ConfigInvalidError("endpoint URL must be non-empty")
        if not self.model:
            raise ConfigInvalidError("model identifier must be non-empty")
        if self.temperature < 0:
            raise ConfigInvalidError(f"temperature must be >= 0, got {self.temperature}")
        if self.temperature > 1.0 and not self.temperature_justification:
            raise ConfigInvalidError(
                f"temperature {self.temperature} > 1.0 requires a justification"
            )
        if self.max_parallel < 1:
            raise ConfigInvalidError(f"max_parallel must be >= 1, got {self.max_parallel}")
        if self.max_attempts < 1:
            raise ConfigInvalidError(f"max_attempts must be >= 1, got {self.max_attempts}")
        if self.backoff_base < 0 or self.backoff_factor < 1:
            raise ConfigInvalidError(
                f"backoff base must be >= 0 and factor >= 1, got "
                f"({self.backoff_base}, {self.backoff_factor})"
            )
        if self.timeout <= 0:
            raise ConfigInvalidError(f"timeout must be positive, got {self.timeout}")

    def backoff_delay(self, attempt: int) -> float:
        """Seconds to wait after the given 1-based failed attempt."""
        return self.backoff_base * self.backoff_factor ** (attempt - 1)


@runtime_checkable
class ChatBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


def _retryable_status(status: int) -> bool:
    return status == 429 or status >= 500


class HttpChatBackend:
    """HTTP chat-completion client for one backend configuration."""

    def __init__(self, config: BackendConfig, api_key: str | None = None):
        self.config = config
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV_VAR)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._client = httpx.Client(timeout=config.timeout, headers=headers)

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            response = self._client.post(self.config.endpoint, json=body)
        except httpx.TimeoutException as exc:
            raise BackendTimeoutError(f"request timed out after {self.config.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise BackendError(f"transport failure: {exc}") from exc
        if response.status_code != 200:
            raise BackendHttpError(
                f"backend returned HTTP {response.status_code}: {response.text[:200]}",
                status_code=response.status_code,
            )
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion payload: {exc}") from exc
        if not isinstance(content, str):
            raise BackendError(f"completion content is {type(content).__name__}, not text")
        return content

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "HttpChatBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def is_retryable(error: BackendError) -> bool:
    """Whether the failure is transient: transport errors, timeouts, rate
    limits, and server-side statuses. Parse failures and other client-side
    rejections are not."""
    if isinstance(error, ParseFailureError):
        return False
    if isinstance(error, BackendHttpError):
        return _retryable_status(error.status_code)
    return isinstance(error, BackendError)

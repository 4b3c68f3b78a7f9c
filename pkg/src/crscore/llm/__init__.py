"""LLM scoring harness: prompt construction, completion parsing, backends,
and batch drivers."""

from .prompts import (
    DEFAULT_INJECTION_PATTERNS,
    FIXED_TAGS,
    PromptBundle,
    build_prompt,
    detect_injection,
    preamble_text,
)
from .completions import ParsedCompletion, extract_first_json_object, parse_completion
from .backend import API_KEY_ENV_VAR, BackendConfig, ChatBackend, HttpChatBackend, is_retryable
from .batch import (
    BatchItem,
    BatchResult,
    ConsistencyRunResult,
    ItemResult,
    apply_scores,
    consistency_run,
    read_batch_jsonl,
    score_batch,
    write_audit_log,
)

__all__ = [
    "API_KEY_ENV_VAR",
    "BackendConfig",
    "BatchItem",
    "BatchResult",
    "ChatBackend",
    "ConsistencyRunResult",
    "DEFAULT_INJECTION_PATTERNS",
    "FIXED_TAGS",
    "HttpChatBackend",
    "ItemResult",
    "ParsedCompletion",
    "PromptBundle",
    "apply_scores",
    "build_prompt",
    "consistency_run",
    "detect_injection",
    "extract_first_json_object",
    "is_retryable",
    "parse_completion",
    "preamble_text",
    "read_batch_jsonl",
    "score_batch",
    "write_audit_log",
]

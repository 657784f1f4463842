"""Decision sources for the power game: scripted baselines and LLM players."""

from .base import Agent, Decision, DecisionFailure, DecisionRequest
from .chat import (
    ChatExchange,
    FixtureTransport,
    HttpTransport,
    ProtocolError,
    RecordingTransport,
    StubTransport,
    TransportError,
    chat_complete,
    request_hash,
)
from .llm import LLMAgent
from .parsing import PowerParseError, parse_power_reply
from .prompts import TEMPLATE_VERSION, PromptBundle, build_prompts
from .scripted import PRNG_ALGORITHM, BestResponseAgent, HoldAgent, RandomAgent

__all__ = [
    "Agent", "Decision", "DecisionFailure", "DecisionRequest",
    "ChatExchange", "FixtureTransport", "HttpTransport", "ProtocolError", "RecordingTransport",
    "StubTransport", "TransportError", "chat_complete", "request_hash",
    "LLMAgent", "PowerParseError", "parse_power_reply",
    "TEMPLATE_VERSION", "PromptBundle", "build_prompts",
    "PRNG_ALGORITHM", "BestResponseAgent", "HoldAgent", "RandomAgent",
]

"""LLM-backed player: one conversation per user, one reply per round."""

from __future__ import annotations

import logging
import time
from typing import Callable, Optional

from .base import Decision, DecisionFailure, DecisionRequest
from .chat import ChatExchange, ProtocolError, Transport, TransportError, chat_complete
from .parsing import PowerParseError, parse_power_reply
from .prompts import CORRECTIVE_MESSAGE, TEMPLATE_VERSION, build_preamble, build_round_message

logger = logging.getLogger(__name__)


class LLMAgent:
    """Ask a chat model for a power each round.

    By default the full dialogue is kept across rounds. ``stateless=True``
    sends only the preamble and the latest round message each time.
    Unparseable replies get a corrective follow-up, up to the request's
    retry budget.
    """

    kind = "llm"

    def __init__(self, transport: Transport, model: str = "gpt-4", temperature: float = 0.0,
                 max_tokens: int = 256, stateless: bool = False, max_tries: int = 3,
                 backoff_base_s: float = 1.0, sleep: Callable[[float], None] = time.sleep):
        self.transport = transport
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.stateless = stateless
        self.max_tries = max_tries
        self.backoff_base_s = backoff_base_s
        self.sleep = sleep
        self.exchange: Optional[ChatExchange] = None

    def _new_exchange(self, obs) -> ChatExchange:
        ex = ChatExchange(model=self.model, temperature=self.temperature, max_tokens=self.max_tokens)
        ex.add("system", build_preamble(obs))
        return ex

    def decide(self, request: DecisionRequest) -> Decision:
        obs = request.observation
        if self.exchange is None or self.stateless:
            self.exchange = self._new_exchange(obs)
        ex = self.exchange
        start = len(ex.messages)
        ex.add("user", build_round_message(obs))

        retries = 0
        replies = []
        for attempt in range(request.retry_budget + 1):
            try:
                text = chat_complete(ex, self.transport, timeout_s=request.timeout_s,
                                     max_tries=self.max_tries, backoff_base_s=self.backoff_base_s,
                                     sleep=self.sleep)
            except (TransportError, ProtocolError) as exc:
                raise DecisionFailure(f"chat failed: {exc}", transcript=ex.messages[start:]) from exc
            retries += ex.retries
            replies.append(text)
            try:
                power = parse_power_reply(text)
            except PowerParseError as exc:
                logger.info("user %d round %d: unparseable reply (%s)", obs.user, obs.round, exc)
                if attempt == request.retry_budget:
                    raise DecisionFailure(f"unparseable reply after {attempt + 1} tries: {exc}",
                                          transcript=ex.messages[start:]) from exc
                ex.add("user", CORRECTIVE_MESSAGE)
                continue
            return Decision(power, {
                "agent": self.kind,
                "model": self.model,
                "template": TEMPLATE_VERSION,
                "retries": retries,
                "parse_retries": attempt,
                "replies": replies,
            })
        raise AssertionError("unreachable")  # pragma: no cover

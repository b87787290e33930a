"""Chat-completion clients: a wire client and a deterministic mock."""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from typing import Callable, Protocol, Sequence

import numpy as np

from ..cdfg import DesignSpace
from ..seeding import derive_seed
from .prompt import InContextPrompt, format_block, format_config


class ClientError(RuntimeError):
    """The language-model service failed or is not configured."""


class LlmClient(Protocol):
    calls: int

    def complete(self, prompt: InContextPrompt, temperature: float, seed: int | None = None) -> str: ...


class MockClient:
    """Offline stand-in.

    modes:
        ``random``       ``n_requested`` uniform-random valid solutions
        ``scripted``     replies taken in order from ``script`` (the last repeats),
                         or ``script(prompt, call_index)`` when it is callable
        ``adversarial``  malformed, out-of-domain, short and prose-only replies
    """

    def __init__(
        self,
        space: DesignSpace,
        mode: str = "random",
        seed: int = 0,
        script: Sequence[str] | Callable[[InContextPrompt, int], str] | None = None,
    ):
        if mode not in ("random", "scripted", "adversarial"):
            raise ValueError(f"unknown mock mode {mode!r}")
        if mode == "scripted" and not script:
            raise ValueError("scripted mock needs a script")
        self.space = space
        self.mode = mode
        self.seed = seed
        self.script = script
        self.calls = 0
        self.temperatures: list[float] = []

    def _rng(self, seed: int | None) -> np.random.Generator:
        return np.random.default_rng(derive_seed(self.seed, f"mock/{self.calls}/{seed}"))

    def complete(self, prompt: InContextPrompt, temperature: float, seed: int | None = None) -> str:
        rng = self._rng(seed)
        idx = self.calls
        self.calls += 1
        self.temperatures.append(temperature)
        n = prompt.n_requested
        if self.mode == "random":
            rows = [self.space.random_config(rng).values for _ in range(n)]
            return "Here are the solutions.\n" + format_block(rows)
        if self.mode == "scripted":
            if callable(self.script):
                return self.script(prompt, idx)
            return self.script[min(idx, len(self.script) - 1)]
        return self._adversarial(rng, n)

    def _adversarial(self, rng: np.random.Generator, n: int) -> str:
        kind = int(rng.integers(6))
        if kind == 0:
            return "I think larger unroll factors are generally better for latency."
        lines = []
        for _ in range(n if kind != 1 else max(1, n // 4)):
            vals = list(self.space.random_config(rng).values)
            roll = int(rng.integers(8))
            j = int(rng.integers(len(vals)))
            if roll == 0:
                vals = vals[:-1]  # wrong arity
            elif roll == 1 and isinstance(vals[j], (int, float)):
                vals[j] = vals[j] * 3 + 1  # out of domain
            elif roll == 2:
                vals[j] = "banana"
            elif roll == 3:
                lines.append("[" + ", ".join(str(v) for v in vals) + "  ")  # unterminated
                continue
            elif roll == 4:
                vals[j] = -17.5
            lines.append(format_config(vals))
        if kind == 2:
            return "\n".join(lines)  # no fence
        if kind == 3:
            lines += lines[:3]  # surplus
        body = "\n".join(lines)
        return f"```solutions\ncount: {n}\n{body}\n```"


class HttpChatClient:
    """POSTs ``{model, messages, temperature}`` and reads ``choices[0].message.content``."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        token_env: str = "LLM_API_TOKEN",
        timeout: float = 60.0,
        max_retries: int = 2,
        backoff_s: float = 1.0,
    ):
        token = os.environ.get(token_env)
        if not token:
            raise ClientError(f"environment variable {token_env} holds no API token")
        if max_retries < 0 or timeout <= 0:
            raise ValueError("timeout must be positive and max_retries non-negative")
        self.endpoint = endpoint
        self.model = model
        self._token = token
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.calls = 0

    def complete(self, prompt: InContextPrompt, temperature: float, seed: int | None = None) -> str:
        self.calls += 1
        payload = {"model": self.model, "messages": prompt.messages(), "temperature": float(temperature)}
        if seed is not None:
            payload["seed"] = int(seed % 2**31)
        body = json.dumps(payload).encode()
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            req = urllib.request.Request(
                self.endpoint,
                data=body,
                headers={"Content-Type": "application/json", "Authorization": f"Bearer {self._token}"},
                method="POST",
            )
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    data = json.loads(resp.read().decode())
                return str(data["choices"][0]["message"]["content"])
            except urllib.error.HTTPError as exc:
                last = exc
                if exc.code < 500 and exc.code != 429:
                    break
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last = exc
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ClientError(f"malformed chat-completion response: {exc}") from exc
            if attempt < self.max_retries:
                time.sleep(self.backoff_s * 2**attempt)
        raise ClientError(f"chat endpoint failed after {self.max_retries + 1} attempts: {last}")

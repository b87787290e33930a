"""LLM-assisted search operators."""

from .algorithms import LlmParams, llmaco_run, llmga_run, llmsa_run
from .client import ClientError, HttpChatClient, MockClient
from .control import PheromoneMatrix, TempController
from .parse import Diagnostics, ParseFailure, parse_response
from .prompt import InContextPrompt, build_prompt

__all__ = [
    "ClientError",
    "Diagnostics",
    "HttpChatClient",
    "InContextPrompt",
    "LlmParams",
    "MockClient",
    "ParseFailure",
    "PheromoneMatrix",
    "TempController",
    "build_prompt",
    "llmaco_run",
    "llmga_run",
    "llmsa_run",
    "parse_response",
]

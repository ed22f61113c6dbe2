"""HTTP backends speaking the chat-completion and TTS wire protocols.

Writer and critic POST a chat-completion body:

    {"model": ..., "messages": [...], "temperature": ..., "seed": ...}

and read choices[0].message.content from the JSON reply.  The
synthesizer POSTs {"text", "reference_audio" (base64 WAV), "language"}
and receives raw WAV bytes.  Bearer tokens are read from the environment
variable named in the backend config; they never appear in config files.
"""

from __future__ import annotations

import base64
import os

import requests

from ..errors import BackendError, ConfigError, MalformedOutputError
from .prompts import render_writer_user_content
from .types import CriticClip, WriterRequest


def _auth_headers(token_env: str | None) -> dict[str, str]:
    if not token_env:
        return {}
    token = os.environ.get(token_env)
    if not token:
        raise ConfigError(f"environment variable {token_env} is not set")
    return {"Authorization": f"Bearer {token}"}


def _post_json(url: str, body: dict, headers: dict[str, str], timeout: float):
    try:
        response = requests.post(url, json=body, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise BackendError(f"request to {url} failed: {exc}") from exc
    if not 200 <= response.status_code < 300:
        raise BackendError(f"{url} returned an error", status=response.status_code,
                           detail=response.text)
    return response


def _chat_content(response) -> str:
    try:
        data = response.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, LookupError, TypeError) as exc:
        raise MalformedOutputError(
            f"chat response missing choices[0].message.content: {exc}",
            raw_text=response.text) from exc
    if not isinstance(content, str):
        raise MalformedOutputError("message content is not a string",
                                   raw_text=response.text)
    return content


class HttpWriterBackend:
    def __init__(self, url: str, model: str, token_env: str | None = None,
                 timeout: float = 120.0):
        self.url = url
        self.model = model
        self.timeout = timeout
        self.backend_id = f"chat:{model}"
        self._headers = _auth_headers(token_env)

    def complete(self, request: WriterRequest) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": render_writer_user_content(request)},
            ],
            "temperature": request.generation_params.temperature,
        }
        if request.generation_params.seed is not None:
            body["seed"] = request.generation_params.seed
        return _chat_content(_post_json(self.url, body, self._headers, self.timeout))


class HttpCriticBackend:
    def __init__(self, url: str, model: str, token_env: str | None = None,
                 timeout: float = 120.0, temperature: float = 0.2):
        self.url = url
        self.model = model
        self.timeout = timeout
        self.temperature = temperature
        self.backend_id = f"chat:{model}"
        self._headers = _auth_headers(token_env)

    def review(self, prompt: str, clips: tuple[CriticClip, ...]) -> str:
        content: list[dict] = []
        for clip in clips:
            content.append({
                "type": "input_audio",
                "input_audio": {
                    "data": base64.b64encode(clip.audio).decode("ascii"),
                    "format": "wav",
                },
            })
            content.append({
                "type": "text",
                "text": f"Utterance {clip.utterance_index}: {clip.transcript}",
            })
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt},
                {"role": "user", "content": content},
            ],
            "temperature": self.temperature,
        }
        return _chat_content(_post_json(self.url, body, self._headers, self.timeout))


class HttpSynthesizerBackend:
    def __init__(self, url: str, token_env: str | None = None, timeout: float = 300.0,
                 backend_id: str | None = None):
        self.url = url
        self.timeout = timeout
        self.backend_id = backend_id or f"tts:{url}"
        self._headers = _auth_headers(token_env)

    def synthesize(self, text: str, reference_audio: bytes, language: str) -> bytes:
        body = {
            "text": text,
            "reference_audio": base64.b64encode(reference_audio).decode("ascii"),
            "language": language,
        }
        return _post_json(self.url, body, self._headers, self.timeout).content

"""Instrumented bait landing service.

The core ``LandingApp`` is transport-free and thread-safe; the campaign
driver calls it in-process with simulated timestamps, and ``LandingServer``
exposes the same app over loopback HTTP for wire-level use.

Form payloads posted to the register endpoint are validated and then
dropped on the floor: no byte of any form field is ever written to a
counter, a log line, or a file. The access log records method, path and
status only (the register path carries no form data).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from typing import Optional
from urllib.parse import parse_qs, urlparse

VISIT_KINDS = ("page_view", "register_access", "plain_access", "project_doc")

REGISTER_FIELDS = ("name", "email", "phone", "city")

BAIT_PAGE = """<!doctype html>
<html lang="pt-BR"><head><meta charset="utf-8"><title>Cadastro</title></head>
<body>
<h1>Para continuar at&eacute; a not&iacute;cia</h1>
<form method="post" action="/register">
  <input type="hidden" name="id" value="{pseudonym}">
  <label>Nome <input name="name"></label>
  <label>E-mail <input name="email"></label>
  <label>Telefone <input name="phone"></label>
  <label>Cidade <input name="city"></label>
  <button type="submit">Registrar e acessar</button>
</form>
<form method="get" action="/access">
  <input type="hidden" name="id" value="{pseudonym}">
  <button type="submit">Acesso sem registro</button>
</form>
<p><a href="/project">Para ver o projeto desta pesquisa cient&iacute;fica clique aqui</a></p>
</body></html>
"""

NEWS_PAGES = {
    "politics": "<html><body><h1>Plenario vota novo relatorio nesta semana</h1></body></html>",
    "sports": "<html><body><h1>Rodada decisiva agita a tabela do campeonato</h1></body></html>",
    "entertainment": "<html><body><h1>Festival anuncia atracoes da proxima edicao</h1></body></html>",
    "general": "<html><body><h1>Resumo do dia</h1></body></html>",
}


@dataclass
class VisitEvent:
    pseudonym: Optional[str]
    kind: str
    at: int

    def __post_init__(self):
        if self.kind not in VISIT_KINDS:
            raise ValueError(f"unknown visit kind {self.kind!r}")


@dataclass
class HitLedger:
    unique_visitors: int = 0
    total_visits: int = 0
    registered_access: int = 0
    unregistered_access: int = 0
    news_visits: int = 0
    project_downloads: int = 0
    unattributed_visits: int = 0
    per_pseudonym: dict = field(default_factory=dict)

    def check_invariants(self) -> None:
        assert self.unique_visitors <= self.total_visits
        assert self.registered_access + self.unregistered_access <= self.total_visits
        assert self.news_visits == self.registered_access + self.unregistered_access
        assert self.project_downloads <= self.total_visits
        assert self.unique_visitors == len(self.per_pseudonym)
        assert sum(v["visit_count"] for v in self.per_pseudonym.values()) + \
            self.unattributed_visits == self.total_visits

    def as_dict(self) -> dict:
        return {
            "unique_visitors": self.unique_visitors,
            "total_visits": self.total_visits,
            "registered_access": self.registered_access,
            "unregistered_access": self.unregistered_access,
            "news_visits": self.news_visits,
            "project_downloads": self.project_downloads,
            "unattributed_visits": self.unattributed_visits,
            "per_pseudonym": [
                {"pseudonym": p, **info} for p, info in sorted(self.per_pseudonym.items())
            ],
        }


def write_ledger(path, ledger: HitLedger) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(ledger.as_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


class ValidationError(ValueError):
    pass


class LandingApp:
    """Counting core shared by the in-sim driver and the HTTP server."""

    def __init__(self, known_pseudonyms: Optional[set[str]] = None,
                 theme_of: Optional[dict[str, str]] = None):
        self.ledger = HitLedger()
        self.events: list[VisitEvent] = []
        self._known = known_pseudonyms
        self._theme_of = theme_of or {}
        self._lock = threading.Lock()

    def _attributed(self, pseudonym: Optional[str]) -> Optional[str]:
        if pseudonym is None:
            return None
        if self._known is not None and pseudonym not in self._known:
            return None
        return pseudonym

    def bait(self, pseudonym: Optional[str], at: int = 0) -> str:
        """Serve the form page; first sight of a pseudonym is a unique visitor."""
        with self._lock:
            p = self._attributed(pseudonym)
            self.ledger.total_visits += 1
            if p is None:
                self.ledger.unattributed_visits += 1
            else:
                info = self.ledger.per_pseudonym.get(p)
                if info is None:
                    self.ledger.per_pseudonym[p] = {"first_visit_at": at, "visit_count": 1}
                    self.ledger.unique_visitors += 1
                else:
                    info["visit_count"] += 1
            self.events.append(VisitEvent(p, "page_view", at))
        return BAIT_PAGE.format(pseudonym=pseudonym or "")

    def register(self, form: dict, pseudonym: Optional[str] = None, at: int = 0) -> str:
        """Validate the form, count the access, discard the payload."""
        for name in REGISTER_FIELDS:
            if not str(form.get(name, "") or "").strip():
                raise ValidationError(f"empty field: {name}")
        with self._lock:
            p = self._attributed(pseudonym)
            self.ledger.registered_access += 1
            self.ledger.news_visits += 1
            self.events.append(VisitEvent(p, "register_access", at))
        return self.news_page(p)

    def access(self, pseudonym: Optional[str] = None, at: int = 0) -> str:
        with self._lock:
            p = self._attributed(pseudonym)
            self.ledger.unregistered_access += 1
            self.ledger.news_visits += 1
            self.events.append(VisitEvent(p, "plain_access", at))
        return self.news_page(p)

    def project(self, pseudonym: Optional[str] = None, at: int = 0) -> str:
        with self._lock:
            p = self._attributed(pseudonym)
            self.ledger.project_downloads += 1
            self.events.append(VisitEvent(p, "project_doc", at))
        return project_document()

    def news_page(self, pseudonym: Optional[str]) -> str:
        theme = self._theme_of.get(pseudonym or "", "general")
        return NEWS_PAGES.get(theme, NEWS_PAGES["general"])


def project_document() -> str:
    return resources.files("phishsim.data").joinpath("project_document.md").read_text(
        encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Loopback HTTP wrapper


class _Handler(BaseHTTPRequestHandler):
    app: LandingApp
    access_log: Optional[object] = None
    clock = None  # callable returning an int timestamp

    def _now(self) -> int:
        return self.clock() if self.clock is not None else 0

    def _send(self, status: int, body: str, location: Optional[str] = None) -> None:
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "text/html; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        if location:
            self.send_header("Location", location)
        self.end_headers()
        self.wfile.write(data)
        self._log_access(status)

    def _log_access(self, status: int) -> None:
        if self.access_log is not None:
            line = json.dumps(
                {"method": self.command, "path": self.path, "status": status}
            )
            with self.app._lock:
                self.access_log.write(line + "\n")
                self.access_log.flush()

    def _pseudonym(self, query: dict) -> Optional[str]:
        vals = query.get("id")
        return vals[0] if vals else None

    def do_GET(self):  # noqa: N802 (http.server API)
        url = urlparse(self.path)
        query = parse_qs(url.query)
        pseud = self._pseudonym(query)
        if url.path == "/bait":
            self._send(200, self.app.bait(pseud, self._now()))
        elif url.path == "/access":
            body = self.app.access(pseud, self._now())
            self._send(303, body, location=f"/news?id={pseud or ''}")
        elif url.path == "/news":
            self._send(200, self.app.news_page(pseud))
        elif url.path == "/project":
            self._send(200, self.app.project(pseud, self._now()))
        else:
            self._send(404, "not found")

    def do_POST(self):  # noqa: N802
        url = urlparse(self.path)
        if url.path != "/register":
            self._send(404, "not found")
            return
        length = int(self.headers.get("Content-Length", "0"))
        form_raw = parse_qs(self.rfile.read(length).decode("utf-8"))
        form = {k: v[0] for k, v in form_raw.items()}
        pseud = form.pop("id", None) or self._pseudonym(parse_qs(url.query))
        try:
            body = self.app.register(form, pseud, self._now())
        except ValidationError as exc:
            self._send(422, f"<html><body>{exc}</body></html>")
            return
        self._send(303, body, location=f"/news?id={pseud or ''}")

    def log_message(self, fmt, *args):  # request lines go to the JSON access log only
        pass


class LandingServer:
    """Threaded loopback HTTP server around a LandingApp."""

    def __init__(self, app: LandingApp, host: str = "127.0.0.1", port: int = 0,
                 access_log_path=None, clock=None):
        handler = type("BoundHandler", (_Handler,), {})
        handler.app = app
        handler.clock = staticmethod(clock) if clock is not None else None
        self._log_file = open(access_log_path, "w", encoding="utf-8") if access_log_path else None
        handler.access_log = self._log_file
        self.app = app
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "LandingServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
        if self._log_file is not None:
            self._log_file.close()

    def __enter__(self) -> "LandingServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

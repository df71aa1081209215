"""The training web application: routes, sinks and their two modes.

Every intentional weakness consults the mode switchboard through a
single vulnerability id, so one id can be toggled without moving any
other surface.  Uploaded file acceptance is the one shared gate: it
stays open while either XSS_UPLOAD or RCE_TEMPLATE is vulnerable, and
the per-id verdict surfaces (response headers, template lookup) remain
governed by their own ids.
"""
from __future__ import annotations

import json
import logging
import mimetypes
import os
import posixpath
import re
import shutil
import threading
import time
import urllib.parse
from email import message_from_bytes
from email.policy import HTTP as _EMAIL_HTTP_POLICY
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources

from . import modes as M
from .datastore import DataStore, seed_store
from .modes import ModeConfig
from .sanitizer import (
    DEFAULT_POLICY,
    SanitizerPolicy,
    escape_attribute,
    escape_html,
    strict_sanitize,
    weak_sanitize,
)
from .session_auth import (
    COOKIE_NAME,
    CookieError,
    FailureThrottle,
    TokenStore,
    generate_key,
    SessionClaims,
    make_cookie_hardened,
    make_cookie_vulnerable,
    parse_cookie_hardened,
    parse_cookie_vulnerable,
    verify_password,
)
from .templating import Template, TemplateError, parse as parse_template

logger = logging.getLogger("emmental.webapp")

DEFAULT_PORT = 8008
SECRET_FILE_CONTENT = "TOP-SECRET: combination to the cheese cellar is 7-13-42\n"
CSP_VALUE = "default-src 'self'; script-src 'self'"
MAX_BODY_BYTES = 10 * 1024 * 1024

# Which id picks the vulnerable or hardened copy of each page template.
TEMPLATE_GOVERNORS = {
    "home": M.XSS_STORED,
    "login": M.CSRF,
    "error": M.XSS_REFLECTED,
    "search": M.XSS_REFLECTED,
    "feed": M.XSSI_FEED,
    "admin": M.INFO_DUMP,
    "dump": M.INFO_DUMP,
}

UPLOAD_ACCEPT_EXTENSIONS = {"txt", "jpg", "png", "gif"}
SAFE_UPLOAD_TYPES = {
    "txt": "text/plain; charset=utf-8",
    "jpg": "image/jpeg",
    "png": "image/png",
    "gif": "image/gif",
}
UPLOAD_NAME_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")

# Routes that change state and therefore need a token in hardened CSRF
# mode.  Login is exempt: there is no session to bind a token to yet.
CSRF_PROTECTED_ROUTES = {"/newsnippet", "/deletesnippet", "/upload", "/saveprofile"}


def _package_data_dir() -> str:
    return str(resources.files(__package__) / "data")


class EmmentalApp:
    """Application state shared by all request handler threads."""

    def __init__(
        self,
        config: ModeConfig,
        *,
        runtime_root: str,
        data_path: str | None = None,
        key: bytes | None = None,
        policy: SanitizerPolicy = DEFAULT_POLICY,
        test_hooks: bool = False,
        clock=time.time,
    ):
        self.config = config
        self.lock = threading.RLock()
        self.key = key if key is not None else generate_key()
        self.policy = policy
        self.test_hooks = test_hooks
        self.tokens = TokenStore(clock=clock)
        self.throttle = FailureThrottle(clock=clock)
        self.runtime_root = os.path.abspath(runtime_root)
        self.static_root = os.path.join(self.runtime_root, "static")
        self._provision_runtime_root()
        self.templates = self._load_templates()
        # The reset baseline is always factory state, never the data file:
        # a relaunch after an attack must not adopt attack residue as the
        # state that reset restores.
        self.baseline = seed_store(hashed_passwords=config.is_hardened(M.INFO_DUMP))
        self.data_path = data_path
        if data_path and os.path.exists(data_path):
            self.store = DataStore.load_file(data_path)
        else:
            self.store = self.baseline.clone()
            self.persist()

    # -- setup -----------------------------------------------------------

    def _provision_runtime_root(self) -> None:
        os.makedirs(self.static_root, exist_ok=True)
        src = os.path.join(_package_data_dir(), "static")
        for name in os.listdir(src):
            target = os.path.join(self.static_root, name)
            if not os.path.exists(target):
                shutil.copyfile(os.path.join(src, name), target)
        secret = os.path.join(self.runtime_root, "secret.txt")
        if not os.path.exists(secret):
            with open(secret, "w", encoding="utf-8") as fh:
                fh.write(SECRET_FILE_CONTENT)

    def _load_templates(self) -> dict[tuple[str, str], Template]:
        loaded: dict[tuple[str, str], Template] = {}
        base = os.path.join(_package_data_dir(), "templates")
        for mode in M.MODES:
            folder = os.path.join(base, mode)
            for filename in sorted(os.listdir(folder)):
                if not filename.endswith(".gtl"):
                    continue
                name = filename[: -len(".gtl")]
                with open(os.path.join(folder, filename), encoding="utf-8") as fh:
                    loaded[(mode, name)] = parse_template(fh.read())
        return loaded

    # -- state -----------------------------------------------------------

    def is_vuln(self, vuln_id: str) -> bool:
        return self.config.is_vulnerable(vuln_id)

    def persist(self) -> None:
        """Write-through snapshot so restarts keep mutated state."""
        if not self.data_path:
            return
        tmp = self.data_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(self.store.dump())
        os.replace(tmp, self.data_path)

    def reset(self) -> None:
        with self.lock:
            self.store = self.baseline.clone()
            self.tokens.clear()
            self.throttle.clear()
            self.persist()

    # -- templates ---------------------------------------------------------

    def template_for(self, name: str) -> Template:
        if self.is_vuln(M.RCE_TEMPLATE):
            shadow: bytes | None = None
            for (_owner, filename), content in self.store.uploads.items():
                if filename == name + ".gtl":
                    shadow = content  # last upload wins
            if shadow is not None:
                try:
                    return parse_template(shadow.decode("utf-8", "replace"))
                except TemplateError as exc:
                    logger.warning("bad shadow template for %s: %s", name, exc)
        mode = self.config.mode_of(TEMPLATE_GOVERNORS[name])
        return self.templates[(mode, name)]

    def render_page(self, name: str, context: dict) -> str:
        result = self.template_for(name).render(context)
        for warning in result.warnings:
            logger.warning("template %s: %s", name, warning)
        return result.text


class EmmentalServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], app: EmmentalApp):
        super().__init__(address, RequestHandler)
        self.app = app


def parse_multipart(content_type: str, body: bytes) -> dict[str, tuple[str | None, bytes]]:
    """Parse multipart/form-data into name -> (filename, content)."""
    head = f"Content-Type: {content_type}\r\nMIME-Version: 1.0\r\n\r\n"
    message = message_from_bytes(head.encode("ascii") + body, policy=_EMAIL_HTTP_POLICY)
    fields: dict[str, tuple[str | None, bytes]] = {}
    if not message.is_multipart():
        return fields
    for part in message.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if not name:
            continue
        payload = part.get_payload(decode=True) or b""
        fields[name] = (part.get_filename(), payload)
    return fields


class RequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: EmmentalServer

    @property
    def app(self) -> EmmentalApp:
        return self.server.app

    def log_message(self, format: str, *args) -> None:
        logger.debug("%s %s", self.address_string(), format % args)

    # -- plumbing ----------------------------------------------------------

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def _dispatch(self, method: str) -> None:
        try:
            with self.app.lock:
                self._route(method)
        except BrokenPipeError:
            pass
        except Exception as exc:  # last-resort error page
            logger.exception("unhandled error for %s", self.path)
            try:
                self._send_error_page(500, f"Internal error: {exc}")
            except Exception:
                pass

    def _route(self, method: str) -> None:
        raw_path = self.path
        route = raw_path.split("?", 1)[0]
        if route == "/":
            self._expect(method, "GET") and self._route_home()
        elif route == "/login":
            if method == "GET":
                self._route_login_form()
            else:
                self._route_login_submit()
        elif route == "/logout":
            self._expect(method, "GET") and self._route_logout()
        elif route == "/search":
            self._expect(method, "GET") and self._route_search()
        elif route == "/newsnippet":
            self._expect(method, "POST") and self._route_newsnippet()
        elif route == "/deletesnippet":
            self._route_deletesnippet(method)
        elif route == "/upload":
            self._expect(method, "POST") and self._route_upload()
        elif raw_path.startswith("/uploads/"):
            self._expect(method, "GET") and self._route_uploads_get(route)
        elif route == "/feed.gtl":
            self._route_feed(method)
        elif route == "/saveprofile":
            self._expect(method, "POST") and self._route_saveprofile()
        elif raw_path.startswith("/static/"):
            self._expect(method, "GET") and self._route_static(raw_path)
        elif route == "/dump.gtl":
            self._expect(method, "GET") and self._route_dump()
        elif route == "/quitserver":
            self._expect(method, "GET") and self._route_quitserver()
        elif route in ("/admin", "/admin/modes"):
            self._expect(method, "GET") and self._route_admin()
        elif route == "/testhooks/reset" and self.app.test_hooks:
            self._expect(method, "POST") and self._route_reset()
        else:
            self._send_error_page(404, f"No such page: {raw_path}")

    def _expect(self, method: str, allowed: str) -> bool:
        if method != allowed:
            self._send_error_page(405, f"Method {method} not allowed here")
            return False
        return True

    def _send(
        self,
        status: int,
        content_type: str,
        body: bytes,
        headers: dict[str, str] | None = None,
        cookies: list[str] | None = None,
    ) -> None:
        final = {"Content-Type": content_type, "Content-Length": str(len(body))}
        if self.app.config.default_mode == M.HARDENED:
            final.setdefault("X-Content-Type-Options", "nosniff")
            if content_type.startswith("text/html"):
                final.setdefault("Content-Security-Policy", CSP_VALUE)
        if headers:
            final.update(headers)
        final["Connection"] = "close"
        self.send_response(status)
        for name, value in final.items():
            self.send_header(name, value)
        for cookie in cookies or []:
            self.send_header("Set-Cookie", cookie)
        self.end_headers()
        self.wfile.write(body)

    def _send_html(self, status: int, text: str, cookies: list[str] | None = None) -> None:
        self._send(status, "text/html; charset=utf-8", text.encode("utf-8"), cookies=cookies)

    def _send_page(self, name: str, context: dict, status: int = 200,
                   cookies: list[str] | None = None) -> None:
        self._send_html(status, self.app.render_page(name, context), cookies=cookies)

    def _send_error_page(self, status: int, message: str) -> None:
        self._send_page("error", {"_status": str(status), "_message": message}, status=status)

    def _redirect(self, location: str, cookies: list[str] | None = None) -> None:
        self._send(303, "text/plain; charset=utf-8", b"", {"Location": location}, cookies)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        if length <= 0:
            return b""
        if length > MAX_BODY_BYTES:
            raise ValueError("request body too large")
        return self.rfile.read(length)

    def _query_params(self) -> dict[str, str]:
        parts = self.path.split("?", 1)
        if len(parts) < 2:
            return {}
        parsed = urllib.parse.parse_qs(parts[1], keep_blank_values=True)
        return {k: v[0] for k, v in parsed.items()}

    def _form_params(self) -> dict[str, str]:
        body = self._read_body().decode("utf-8", "replace")
        parsed = urllib.parse.parse_qs(body, keep_blank_values=True)
        return {k: v[0] for k, v in parsed.items()}

    # -- sessions ------------------------------------------------------------

    def _cookie_value(self) -> str | None:
        header = self.headers.get("Cookie", "")
        for chunk in header.split(";"):
            name, sep, value = chunk.strip().partition("=")
            if sep and name == COOKIE_NAME:
                return value
        return None

    def _claims(self) -> SessionClaims | None:
        value = self._cookie_value()
        if not value:
            return None
        try:
            if self.app.is_vuln(M.COOKIE_FORGE):
                # Checksum field is never verified and the store is not
                # consulted: the wire claims are taken at face value.
                return parse_cookie_vulnerable(value)
            claims = parse_cookie_hardened(value, self.app.key)
            record = self.app.store.get_user(claims.username)
            if record is None:
                return None
            # Authority always comes from the store, not the wire.
            return SessionClaims(record.username, record.is_admin, record.is_author)
        except CookieError:
            return None

    def _issue_cookie(self, username: str, is_admin: bool, is_author: bool) -> str:
        if self.app.is_vuln(M.COOKIE_FORGE):
            value = make_cookie_vulnerable(username, is_admin, is_author)
            return f"{COOKIE_NAME}={value}; Path=/"
        value = make_cookie_hardened(username, is_admin, is_author, self.app.key)
        return f"{COOKIE_NAME}={value}; Path=/; HttpOnly; SameSite=Lax"

    def _require(self, level: str) -> SessionClaims | None:
        """Return claims with at least the given level, else send 403."""
        claims = self._claims()
        ok = claims is not None
        if ok and level == "author":
            ok = claims.is_author or claims.is_admin
        elif ok and level == "admin":
            ok = claims.is_admin
        if not ok:
            self._send_error_page(403, f"This page needs {level} access")
            return None
        return claims

    def _csrf_ok(self, claims: SessionClaims, supplied: str | None) -> bool:
        if self.app.is_vuln(M.CSRF):
            return True
        token = supplied or self.headers.get("X-CSRF-Token") or ""
        return self.app.tokens.validate(claims.username, token)

    def _same_origin(self) -> bool:
        host = self.headers.get("Host", "")
        for header in ("Origin", "Referer"):
            value = self.headers.get(header)
            if value:
                return urllib.parse.urlsplit(value).netloc == host
        return False

    # -- page fragments ---------------------------------------------------

    def _nav_fragment(self, claims: SessionClaims | None) -> str:
        links = ['<a href="/">Home</a>', '<a href="/search">Search</a>']
        if claims:
            if claims.is_admin:
                links.append('<a href="/admin">Admin</a>')
            links.append('<a href="/logout">Sign out</a>')
        else:
            links.append('<a href="/login">Sign in</a>')
        return "<p>" + " | ".join(links) + "</p>"

    def _csrf_meta(self, claims: SessionClaims | None) -> str:
        if not claims:
            return ""
        token = self.app.tokens.issue(claims.username)
        return f'<meta name="csrf-token" content="{token}">'

    def _csrf_field(self, claims: SessionClaims) -> str:
        token = self.app.tokens.issue(claims.username)
        return f'<input type="hidden" name="csrf_token" value="{token}">'

    def _snippet_rows(self, claims: SessionClaims | None) -> str:
        app = self.app
        rows = []
        for username, index, body in app.store.all_snippets():
            if app.is_vuln(M.XSS_STORED):
                shown = weak_sanitize(body)
            else:
                shown = strict_sanitize(body, app.policy)
            controls = ""
            if claims and claims.username == username:
                if app.is_vuln(M.CSRF):
                    controls = f' <a href="/deletesnippet?index={index}">[delete]</a>'
                else:
                    controls = (
                        '<form class="inline" method="post" action="/deletesnippet">'
                        f"{self._csrf_field(claims)}"
                        f'<input type="hidden" name="index" value="{index}">'
                        "<button>delete</button></form>"
                    )
            rows.append(f"<li><b>{escape_html(username)}</b>: {shown}{controls}</li>")
        return "\n".join(rows)

    def _forms_fragment(self, claims: SessionClaims | None) -> str:
        if not claims:
            return "<p>Sign in to post snippets.</p>"
        app = self.app
        record = app.store.get_user(claims.username)
        color = escape_attribute(record.color) if record else ""
        private = escape_attribute(record.private_snippet) if record else ""
        parts = [
            '<h2>Post a snippet</h2>',
            '<form method="post" action="/newsnippet">',
            self._csrf_field(claims),
            '<input type="text" name="body" size="60">',
            "<button>Post</button></form>",
            "<h2>Profile</h2>",
            '<form method="post" action="/saveprofile">',
            self._csrf_field(claims),
            f'<label>Color <input type="text" name="color" value="{color}"></label>',
            '<label>Private snippet <input type="text" name="private_snippet"'
            f' value="{private}"></label>',
            "<button>Save profile</button></form>",
        ]
        if claims.is_author or claims.is_admin:
            parts += [
                "<h2>Uploads</h2>",
                '<form method="post" action="/upload" enctype="multipart/form-data">',
                self._csrf_field(claims),
                '<input type="file" name="file">',
                "<button>Upload</button></form>",
                "<ul>",
            ]
            for name in app.store.uploads_for(claims.username):
                quoted_user = urllib.parse.quote(claims.username)
                quoted_name = urllib.parse.quote(name)
                link = f"/uploads/{quoted_user}/{quoted_name}"
                parts.append(
                    f'<li><a href="{escape_attribute(link)}">{escape_html(name)}</a></li>'
                )
            parts.append("</ul>")
        return "\n".join(parts)

    def _home_context(self, claims: SessionClaims | None) -> dict:
        app = self.app
        record = app.store.get_user(claims.username) if claims else None
        color = record.color if record else ""
        if not app.is_vuln(M.XSS_ATTR):
            color = escape_attribute(color)
        return {
            "_user": escape_html(claims.username) if claims else "guest",
            "_color": color,
            "_nav": self._nav_fragment(claims),
            "_csrf_meta": self._csrf_meta(claims),
            "_snippet_rows": self._snippet_rows(claims),
            "_forms": self._forms_fragment(claims),
        }

    # -- routes ------------------------------------------------------------

    def _route_home(self) -> None:
        self._send_page("home", self._home_context(self._claims()))

    def _route_login_form(self) -> None:
        self._send_page("login", {"_notice": ""})

    def _route_login_submit(self) -> None:
        app = self.app
        params = self._form_params()
        username = params.get("username", "")
        password = params.get("password", "")
        if app.config.default_mode == M.HARDENED and app.throttle.is_blocked(username):
            self._send_error_page(429, "Too many failed sign-in attempts; wait a minute")
            return
        record = app.store.get_user(username)
        if record is None or not verify_password(record.password, password):
            if app.config.default_mode == M.HARDENED:
                app.throttle.record_failure(username)
            self._send_error_page(403, "Invalid credentials")
            return
        app.throttle.reset(username)
        cookie = self._issue_cookie(record.username, record.is_admin, record.is_author)
        self._redirect("/", cookies=[cookie])

    def _route_logout(self) -> None:
        expired = f"{COOKIE_NAME}=; Path=/; Max-Age=0"
        self._redirect("/", cookies=[expired])

    def _route_search(self) -> None:
        app = self.app
        params = self._query_params()
        query = params.get("input", "")
        matches = [
            body
            for _user, _index, body in app.store.all_snippets()
            if query and query.lower() in body.lower()
        ]
        if app.is_vuln(M.XSS_STORED):
            shown = [weak_sanitize(body) for body in matches]
        else:
            shown = [strict_sanitize(body, app.policy) for body in matches]
        rows = "\n".join(f"<li>{body}</li>" for body in shown)
        if params.get("ajax") == "1":
            # Fragment for script-driven insertion into the page.
            if app.is_vuln(M.XSS_REFLECTED_AJAX):
                fragment = f"Results for <b>{query}</b> ({len(matches)} matches)"
            else:
                fragment = (
                    f"Results for <b>{escape_html(query)}</b> ({len(matches)} matches)"
                )
            self._send_html(200, fragment)
            return
        self._send_page(
            "search",
            {"_query": query, "_count": str(len(matches)), "_result_rows": rows},
        )

    def _route_newsnippet(self) -> None:
        claims = self._require("user")
        if not claims:
            return
        params = self._form_params()
        if not self._csrf_ok(claims, params.get("csrf_token")):
            self._send_error_page(403, "Missing or invalid request token")
            return
        body = params.get("body", "")
        if not body:
            self._send_error_page(400, "Snippet body is required")
            return
        record = self.app.store.get_user(claims.username)
        if record is None:
            self._send_error_page(404, f"No such user: {claims.username}")
            return
        self.app.store.add_snippet(claims.username, body)
        self.app.persist()
        self._redirect("/")

    def _route_deletesnippet(self, method: str) -> None:
        app = self.app
        if not app.is_vuln(M.CSRF) and method != "POST":
            self._send_error_page(405, "Method GET not allowed here")
            return
        claims = self._require("user")
        if not claims:
            return
        params = self._form_params() if method == "POST" else self._query_params()
        if not self._csrf_ok(claims, params.get("csrf_token")):
            self._send_error_page(403, "Missing or invalid request token")
            return
        try:
            index = int(params.get("index", ""))
            app.store.delete_snippet(claims.username, index)
        except (ValueError, KeyError, IndexError):
            self._send_error_page(400, "No such snippet")
            return
        app.persist()
        self._redirect("/")

    def _route_upload(self) -> None:
        app = self.app
        claims = self._require("author")
        if not claims:
            return
        content_type = self.headers.get("Content-Type", "")
        if "multipart/form-data" not in content_type:
            self._send_error_page(400, "Expected multipart/form-data")
            return
        fields = parse_multipart(content_type, self._read_body())
        token_field = fields.get("csrf_token", (None, b""))[1].decode("utf-8", "replace")
        if not self._csrf_ok(claims, token_field or None):
            self._send_error_page(403, "Missing or invalid request token")
            return
        filename, content = fields.get("file", (None, b""))
        if not filename:
            self._send_error_page(400, "No file in upload")
            return
        # Acceptance stays open while either consumer of raw uploads is
        # vulnerable; serving behavior stays with XSS_UPLOAD and template
        # lookup with RCE_TEMPLATE.
        unrestricted = app.is_vuln(M.XSS_UPLOAD) or app.is_vuln(M.RCE_TEMPLATE)
        if not unrestricted:
            base = filename.rsplit("/", 1)[-1].rsplit("\\", 1)[-1]
            extension = base.rsplit(".", 1)[-1].lower() if "." in base else ""
            if not UPLOAD_NAME_RE.fullmatch(base) or extension not in UPLOAD_ACCEPT_EXTENSIONS:
                self._send_error_page(
                    400, f"File type not allowed; accepted: {sorted(UPLOAD_ACCEPT_EXTENSIONS)}"
                )
                return
            filename = base
        app.store.store_upload(claims.username, filename, content)
        app.persist()
        self._redirect("/")

    def _route_uploads_get(self, route: str) -> None:
        app = self.app
        parts = route.split("/")
        if len(parts) != 4 or not parts[2] or not parts[3]:
            self._send_error_page(404, f"No such page: {self.path}")
            return
        username = urllib.parse.unquote(parts[2])
        filename = urllib.parse.unquote(parts[3])
        content = app.store.get_upload(username, filename)
        if content is None:
            self._send_error_page(404, f"No such upload: {filename}")
            return
        extension = filename.rsplit(".", 1)[-1].lower() if "." in filename else ""
        headers: dict[str, str] = {}
        if app.is_vuln(M.XSS_UPLOAD):
            guessed = mimetypes.guess_type(filename)[0]
            content_type = guessed or "application/octet-stream"
        else:
            headers["X-Content-Type-Options"] = "nosniff"
            if extension in SAFE_UPLOAD_TYPES:
                content_type = SAFE_UPLOAD_TYPES[extension]
            else:
                content_type = "application/octet-stream"
                headers["Content-Disposition"] = "attachment"
        self._send(200, content_type, content, headers)

    def _feed_payload(self, username: str, private_snippet: str) -> str:
        entries = self.app.store.first_snippets()
        entries.append(("user", username))
        entries.append(("private_snippet", private_snippet))
        if self.app.is_vuln(M.XSS_STORED_AJAX):
            # Naive concatenation: quotes in the data end the JS string.
            inner = ", ".join("'" + key + "': '" + value + "'" for key, value in entries)
            return "{" + inner + "}"
        encoded = json.dumps(dict(entries))
        return encoded.replace("'", "\\u0027")

    def _route_feed(self, method: str) -> None:
        app = self.app
        claims = self._require("user")
        if not claims:
            return
        record = app.store.get_user(claims.username)
        if record is None:
            self._send_error_page(404, f"No such user: {claims.username}")
            return
        payload = self._feed_payload(record.username, record.private_snippet)
        if app.is_vuln(M.XSSI_FEED):
            if method != "GET":
                self._send_error_page(405, f"Method {method} not allowed here")
                return
            body = app.render_page("feed", {"_feed_payload": payload})
            self._send(200, "application/javascript; charset=utf-8", body.encode("utf-8"))
            return
        # Origin outranks method: a cross-origin GET is refused outright
        # rather than being told which method would have worked.
        if not self._same_origin():
            self._send_error_page(403, "Cross-origin feed requests are refused")
            return
        if method != "POST":
            self._send_error_page(405, f"Method {method} not allowed here")
            return
        params = self._form_params()
        if not self._csrf_ok_feed(claims, params.get("csrf_token")):
            self._send_error_page(403, "Missing or invalid request token")
            return
        body = app.render_page("feed", {"_feed_payload": payload})
        self._send(
            200,
            "application/json; charset=utf-8",
            body.encode("utf-8"),
            {"X-Content-Type-Options": "nosniff"},
        )

    def _csrf_ok_feed(self, claims: SessionClaims, supplied: str | None) -> bool:
        """Feed token check, governed by XSSI_FEED rather than CSRF."""
        token = supplied or self.headers.get("X-CSRF-Token") or ""
        return self.app.tokens.validate(claims.username, token)

    def _route_saveprofile(self) -> None:
        app = self.app
        claims = self._require("user")
        if not claims:
            return
        params = self._form_params()
        if not self._csrf_ok(claims, params.get("csrf_token")):
            self._send_error_page(403, "Missing or invalid request token")
            return
        record = app.store.get_user(claims.username)
        if record is None:
            self._send_error_page(404, f"No such user: {claims.username}")
            return
        if "color" in params:
            record.color = params["color"]
        if "private_snippet" in params:
            record.private_snippet = params["private_snippet"]
        if app.is_vuln(M.PRIV_ESCALATION):
            # Client-supplied authority flags are honored as sent.
            if "is_admin" in params:
                record.is_admin = params["is_admin"] in ("1", "true", "on")
            if "is_author" in params:
                record.is_author = params["is_author"] in ("1", "true", "on")
        app.persist()
        cookie = self._issue_cookie(record.username, record.is_admin, record.is_author)
        self._redirect("/", cookies=[cookie])

    def _route_static(self, raw_path: str) -> None:
        app = self.app
        rest = raw_path[len("/static/") :].split("?", 1)[0]
        rel = urllib.parse.unquote(rest)  # exactly one decode in both modes
        if app.is_vuln(M.PATH_TRAVERSAL):
            resolved = rel
        else:
            if "\x00" in rel or "\\" in rel or rel.startswith("/"):
                self._send_error_page(403, "Static path refused")
                return
            normalized = posixpath.normpath(rel)
            if normalized == ".." or normalized.startswith("../") or normalized in (".", ""):
                self._send_error_page(403, "Static path refused")
                return
            resolved = normalized
        if resolved == "app.js":
            variant = "vulnerable" if app.is_vuln(M.XSSI_FEED) else "hardened"
            resolved = f"app-{variant}.js"
        # Vulnerable mode: naive join, the OS resolves any .. segments.
        full = os.path.join(app.static_root, resolved)
        try:
            with open(full, "rb") as fh:
                content = fh.read()
        except (OSError, ValueError):
            self._send_error_page(404, f"No such file: {rel}")
            return
        guessed = mimetypes.guess_type(resolved)[0] or "application/octet-stream"
        self._send(200, guessed, content)

    def _dump_rows(self) -> str:
        app = self.app
        rows = []
        for record in app.store.users.values():
            counts = (
                f"snippets={len(app.store.snippets.get(record.username, []))}"
                f" uploads={len(app.store.uploads_for(record.username))}"
            )
            flags = f"admin={int(record.is_admin)} author={int(record.is_author)}"
            if app.is_vuln(M.INFO_DUMP):
                rows.append(
                    "<li>"
                    f"{escape_html(record.username)} password={escape_html(record.password)}"
                    f" {flags} {counts}"
                    f" private={escape_html(record.private_snippet)}"
                    "</li>"
                )
            else:
                rows.append(
                    f"<li>{escape_html(record.username)} {flags} {counts}</li>"
                )
        return "\n".join(rows)

    def _route_dump(self) -> None:
        if not self.app.is_vuln(M.INFO_DUMP):
            if not self._require("admin"):
                return
        self._send_page("dump", {"_dump_rows": self._dump_rows()})

    def _route_quitserver(self) -> None:
        if not self.app.is_vuln(M.DOS_QUIT):
            self._send_error_page(403, "Administrative restart is disabled")
            return
        self._send(200, "text/plain; charset=utf-8", b"restarting\n")
        self.wfile.flush()
        logger.warning("quitserver hit; exiting with restart code 42")
        os._exit(42)

    def _route_admin(self) -> None:
        claims = self._require("admin")
        if not claims:
            return
        config = self.app.config
        rows = []
        for vuln_id in M.ALL_VULNERABILITIES:
            mode = config.mode_of(vuln_id)
            marker = " (override)" if vuln_id in config.overrides else ""
            rows.append(f"<tr><td>{vuln_id}</td><td>{mode}{marker}</td></tr>")
        self._send_page(
            "admin",
            {
                "_user": escape_html(claims.username),
                "_mode_rows": "\n".join(rows),
                "_default_mode": config.default_mode,
            },
        )

    def _route_reset(self) -> None:
        self.app.reset()
        self._send(200, "text/plain; charset=utf-8", b"reset\n")

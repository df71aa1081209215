// Feed widget, fetch flavor: same-origin POST carrying the page token.
// Refuses any body whose first line is not exactly the anti-hijacking
// guard, parses the rest as JSON and only ever writes text nodes.
// Never adds script elements to the page and never evaluates the body.

(function () {
  "use strict";
  const GUARD = ")]}',";
  let inFlight = false;
  let bootstrapped = false;

  interface FeedPayload {
    [owner: string]: string;
    user: string;
    private_snippet: string;
  }

  function isFeedPayload(value: unknown): value is FeedPayload {
    if (typeof value !== "object" || value === null || Array.isArray(value)) {
      return false;
    }
    const record = value as Record<string, unknown>;
    for (const key of Object.keys(record)) {
      if (typeof record[key] !== "string") { return false; }
    }
    return typeof record.user === "string" &&
      typeof record.private_snippet === "string";
  }

  function csrfToken(): string {
    const meta = document.querySelector('meta[name="csrf-token"]');
    return (meta && meta.getAttribute("content")) || "";
  }

  function stripGuard(text: string): string {
    const newline = text.indexOf("\n");
    if (newline < 0 || text.slice(0, newline) !== GUARD) {
      throw new Error("missing anti-hijacking guard line");
    }
    return text.slice(newline + 1);
  }

  function showError(root: HTMLElement, message: string): void {
    root.textContent = "";
    const region = document.createElement("span");
    region.className = "feed-error";
    region.textContent = message;
    root.appendChild(region);
  }

  function showFeed(root: HTMLElement, payload: unknown): void {
    if (!isFeedPayload(payload)) {
      throw new Error("unexpected feed shape");
    }
    root.textContent = "";
    const who = document.createElement("b");
    who.textContent = payload.user;
    root.appendChild(document.createTextNode("Feed for "));
    root.appendChild(who);
    root.appendChild(document.createTextNode(": " + payload.private_snippet));
    for (const owner of Object.keys(payload)) {
      if (owner === "user" || owner === "private_snippet") { continue; }
      root.appendChild(document.createElement("br"));
      root.appendChild(document.createTextNode(owner + ": " + payload[owner]));
    }
  }

  function loadFeed(): void {
    const root = document.getElementById("feed-root");
    if (!root || inFlight) { return; }
    inFlight = true;
    fetch("/feed.gtl", {
      method: "POST",
      credentials: "same-origin",
      headers: { "X-CSRF-Token": csrfToken() }
    })
      .then(function (response) {
        if (!response.ok) {
          throw new Error("feed request failed: " + response.status);
        }
        return response.text();
      })
      .then(function (text) {
        showFeed(root, JSON.parse(stripGuard(text)));
      })
      .catch(function (err: unknown) {
        const reason = err instanceof Error ? err.message : String(err);
        showError(root, "Could not load feed: " + reason);
      })
      .finally(function () {
        inFlight = false;
      });
  }

  function bootstrap(): void {
    if (bootstrapped) { return; }
    bootstrapped = true;
    const link = document.getElementById("refresh-feed");
    if (link) {
      link.addEventListener("click", function (ev) {
        ev.preventDefault();
        loadFeed();
      });
    }
    loadFeed();
  }

  document.addEventListener("DOMContentLoaded", bootstrap);
  if (document.readyState !== "loading") {
    bootstrap();
  }
})();

import { afterEach, beforeEach, expect, it, vi } from "vitest";

import { clickRefresh, flush, installPage, runAsset } from "./helpers";

const GUARD = ")]}',";

interface FakeResponse {
  ok: boolean;
  status: number;
  text: () => Promise<string>;
}

interface Call {
  url: string;
  init: RequestInit;
}

let root: HTMLElement;

beforeEach(() => {
  delete (window as { _feed?: unknown })._feed;
  root = installPage(true);
});

afterEach(() => {
  vi.unstubAllGlobals();
});

function stubFetch(body: string, status = 200): Call[] {
  const calls: Call[] = [];
  vi.stubGlobal("fetch", (url: string, init: RequestInit): Promise<FakeResponse> => {
    calls.push({ url, init });
    return Promise.resolve({
      ok: status >= 200 && status < 300,
      status,
      text: () => Promise.resolve(body),
    });
  });
  return calls;
}

function feedBody(snippet: string, board: Record<string, string> = {}): string {
  const payload = { ...board, user: "cheddar", private_snippet: snippet };
  return GUARD + "\n" + JSON.stringify(payload);
}

it("renders script snippets as literal text with zero script elements", async () => {
  stubFetch(feedBody(
    "<script>alert(1)</script><img src=x onerror=alert(2)>",
    { brie: "<script>alert(3)</script>" }
  ));
  const before = document.querySelectorAll("script").length;
  runAsset("app-hardened.js");
  await flush();
  expect(document.querySelectorAll("script").length).toBe(before);
  expect(root.querySelectorAll("script").length).toBe(0);
  expect(root.querySelectorAll("img").length).toBe(0);
  expect(root.textContent).toContain("<script>alert(1)</script>");
  expect(root.textContent).toContain("brie: <script>alert(3)</script>");
  // Snippet strings become text nodes; the only elements are the
  // widget's own username wrapper and row breaks.
  const tags = Array.from(root.querySelectorAll("*")).map((el) => el.tagName);
  expect(tags).toEqual(["B", "BR"]);
});

it("shows the feed for a benign payload", async () => {
  stubFetch(feedBody("the cellar key is under the mat", { brie: "hello board" }));
  runAsset("app-hardened.js");
  await flush();
  expect(root.querySelector("b")!.textContent).toBe("cheddar");
  expect(root.textContent).toContain("the cellar key is under the mat");
  expect(root.textContent).toContain("brie: hello board");
  expect(root.querySelector(".feed-error")).toBeNull();
});

it("refuses a body whose first line is not the guard", async () => {
  stubFetch(JSON.stringify({ user: "cheddar", private_snippet: "hi" }) + "\n{}");
  runAsset("app-hardened.js");
  await flush();
  expect(root.querySelector(".feed-error")).not.toBeNull();
  expect(root.textContent).toContain("Could not load feed");
  expect(root.textContent).not.toContain("cheddar");
});

it("refuses a body with no newline at all", async () => {
  stubFetch(JSON.stringify({ user: "cheddar", private_snippet: "hi" }));
  runAsset("app-hardened.js");
  await flush();
  expect(root.querySelector(".feed-error")).not.toBeNull();
});

it("requires the guard line to match exactly", async () => {
  stubFetch(GUARD + " \n" + JSON.stringify({ user: "a", private_snippet: "b" }));
  runAsset("app-hardened.js");
  await flush();
  expect(root.querySelector(".feed-error")).not.toBeNull();
});

it("never evaluates a script-call body", async () => {
  stubFetch("_feed({'user': 'x', 'private_snippet': 'y'})\n");
  let evaluated = false;
  (window as { _feed?: () => void })._feed = () => {
    evaluated = true;
  };
  runAsset("app-hardened.js");
  await flush();
  expect(evaluated).toBe(false);
  expect(root.querySelector(".feed-error")).not.toBeNull();
});

it("shows the error region on malformed JSON", async () => {
  stubFetch(GUARD + "\n{not json");
  runAsset("app-hardened.js");
  await flush();
  expect(root.querySelector(".feed-error")).not.toBeNull();
  expect(root.querySelectorAll("b").length).toBe(0);
});

it("rejects a payload missing the expected fields", async () => {
  stubFetch(GUARD + "\n" + JSON.stringify({ user: "cheddar" }));
  runAsset("app-hardened.js");
  await flush();
  expect(root.querySelector(".feed-error")).not.toBeNull();
});

it("rejects a payload carrying non-string values", async () => {
  stubFetch(GUARD + "\n" + JSON.stringify({
    user: "cheddar",
    private_snippet: "hi",
    brie: { nested: "object" },
  }));
  runAsset("app-hardened.js");
  await flush();
  expect(root.querySelector(".feed-error")).not.toBeNull();
  expect(root.textContent).not.toContain("nested");
});

it("defines no _feed global", async () => {
  stubFetch(feedBody("hello"));
  runAsset("app-hardened.js");
  await flush();
  expect((window as { _feed?: unknown })._feed).toBeUndefined();
});

it("posts same-origin with the page token", async () => {
  const calls = stubFetch(feedBody("hello"));
  runAsset("app-hardened.js");
  await flush();
  expect(calls.length).toBe(1);
  expect(calls[0].url).toBe("/feed.gtl");
  expect(calls[0].init.method).toBe("POST");
  expect(calls[0].init.credentials).toBe("same-origin");
  const headers = calls[0].init.headers as Record<string, string>;
  expect(headers["X-CSRF-Token"]).toBe("tok-123");
});

it("reports refused requests in the error region", async () => {
  stubFetch("forbidden", 403);
  runAsset("app-hardened.js");
  await flush();
  expect(root.querySelector(".feed-error")!.textContent).toContain("403");
});

it("ignores refresh clicks while a request is in flight", async () => {
  let release!: (value: FakeResponse) => void;
  let calls = 0;
  vi.stubGlobal("fetch", (): Promise<FakeResponse> => {
    calls += 1;
    return new Promise((resolve) => {
      release = resolve;
    });
  });
  runAsset("app-hardened.js");
  clickRefresh();
  clickRefresh();
  expect(calls).toBe(1);
  release({ ok: true, status: 200, text: () => Promise.resolve(feedBody("hi")) });
  await flush();
  clickRefresh();
  expect(calls).toBe(2);
});

it("double bootstrap fetches once and arms one listener", async () => {
  const calls = stubFetch(feedBody("hi"));
  runAsset("app-hardened.js");
  document.dispatchEvent(new Event("DOMContentLoaded"));
  await flush();
  expect(calls.length).toBe(1);
  clickRefresh();
  await flush();
  expect(calls.length).toBe(2);
});

import { beforeEach, expect, it } from "vitest";

import { clickRefresh, installPage, runAsset } from "./helpers";

let root: HTMLElement;

beforeEach(() => {
  delete (window as { _feed?: unknown })._feed;
  root = installPage(false);
});

function scriptTags(): HTMLScriptElement[] {
  return Array.from(document.querySelectorAll("script"));
}

function finishLoad(tag: HTMLScriptElement): void {
  // Stand-in for the browser completing the script fetch.
  tag.onload!.call(tag, new Event("load"));
}

it("defines the _feed global", () => {
  runAsset("app-vulnerable.js");
  expect(typeof (window as { _feed?: unknown })._feed).toBe("function");
});

it("bootstrap pulls the feed through a script element", () => {
  runAsset("app-vulnerable.js");
  const tags = scriptTags();
  expect(tags.length).toBe(1);
  expect(tags[0].getAttribute("src")).toMatch(/^\/feed\.gtl\?ts=\d+$/);
});

it("refresh with a script snippet adds script elements to the page", () => {
  runAsset("app-vulnerable.js");
  finishLoad(scriptTags()[0]);
  const before = scriptTags().length;
  clickRefresh();
  // The loader tag lands first; the fetched body then runs as code.
  (0, eval)(
    "_feed({'user': 'cheddar', " +
      "'private_snippet': '<script>window.exploited = true</script>'})"
  );
  expect(scriptTags().length).toBeGreaterThan(before);
  expect(root.querySelector("script")).not.toBeNull();
  expect(root.innerHTML).toContain("<script>");
});

it("writes the feed fields into the page as markup", () => {
  runAsset("app-vulnerable.js");
  (0, eval)(
    "_feed({'brie': 'hello board', " +
      "'user': 'cheddar', 'private_snippet': 'plain text'})"
  );
  expect(root.querySelector("b")!.textContent).toBe("cheddar");
  expect(root.textContent).toContain("plain text");
  expect(root.textContent).toContain("brie: hello board");
});

it("board snippet markup lands in the DOM as elements", () => {
  runAsset("app-vulnerable.js");
  (0, eval)(
    "_feed({'brie': '<script>alert(3)</script>', " +
      "'user': 'cheddar', 'private_snippet': 'x'})"
  );
  expect(root.querySelectorAll("script").length).toBe(1);
});

function swallowLoaderTags(): HTMLScriptElement[] {
  // Keep loader tags disconnected so the DOM emulator cannot complete
  // them before the test decides to; completion stays manual.
  const swallowed: HTMLScriptElement[] = [];
  const body = document.body as unknown as Record<string, unknown>;
  body.appendChild = (node: Node) => {
    swallowed.push(node as HTMLScriptElement);
    return node;
  };
  return swallowed;
}

function restoreAppendChild(): void {
  Reflect.deleteProperty(document.body, "appendChild");
}

it("ignores refresh clicks while a load is in flight", () => {
  const swallowed = swallowLoaderTags();
  try {
    runAsset("app-vulnerable.js");
    expect(swallowed.length).toBe(1);
    clickRefresh();
    clickRefresh();
    expect(swallowed.length).toBe(1);
    finishLoad(swallowed[0]);
    clickRefresh();
    expect(swallowed.length).toBe(2);
  } finally {
    restoreAppendChild();
  }
});

it("a failed load releases the in-flight latch", () => {
  const swallowed = swallowLoaderTags();
  try {
    runAsset("app-vulnerable.js");
    const tag = swallowed[0];
    tag.onerror!.call(tag, new Event("error"));
    clickRefresh();
    expect(swallowed.length).toBe(2);
  } finally {
    restoreAppendChild();
  }
});

it("double bootstrap arms the widget once", () => {
  runAsset("app-vulnerable.js");
  document.dispatchEvent(new Event("DOMContentLoaded"));
  expect(scriptTags().length).toBe(1);
  finishLoad(scriptTags()[0]);
  clickRefresh();
  expect(scriptTags().length).toBe(2);
});

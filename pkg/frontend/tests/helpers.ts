import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));

export function runAsset(name: string): void {
  const code = readFileSync(join(here, "..", "dist", name), "utf8");
  // Execute like a classic script tag: the assets only touch globals.
  new Function(code)();
}

export function installPage(withToken: boolean): HTMLElement {
  document.head.innerHTML = withToken
    ? '<meta name="csrf-token" content="tok-123">'
    : "";
  document.body.innerHTML =
    '<div id="feed-root"></div>' +
    '<p><a href="#" id="refresh-feed">Refresh feed</a></p>';
  return document.getElementById("feed-root")!;
}

export function clickRefresh(): void {
  const link = document.getElementById("refresh-feed")!;
  link.dispatchEvent(new Event("click", { bubbles: true, cancelable: true }));
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

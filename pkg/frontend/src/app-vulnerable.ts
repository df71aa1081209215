// Feed widget, script-src flavor: pulls the feed as an executable
// script and writes whatever comes back into the page with innerHTML.

interface FeedPayload {
  [owner: string]: string;
  user: string;
  private_snippet: string;
}

interface Window {
  _feed?: (data: FeedPayload) => void;
}

(function () {
  let inFlight = false;
  let bootstrapped = false;

  window._feed = function (data) {
    const root = document.getElementById("feed-root");
    if (!root) { return; }
    let markup = "Feed for <b>" + data.user + "</b>: " + data.private_snippet;
    for (const owner of Object.keys(data)) {
      if (owner === "user" || owner === "private_snippet") { continue; }
      markup += "<br>" + owner + ": " + data[owner];
    }
    root.innerHTML = markup;
  };

  function loadFeed(): void {
    if (inFlight) { return; }
    inFlight = true;
    const done = function () { inFlight = false; };
    const tag = document.createElement("script");
    tag.src = "/feed.gtl?ts=" + Date.now();
    tag.onload = done;
    tag.onerror = done;
    document.body.appendChild(tag);
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

  // The readyState check covers injection after the page finished
  // loading; the flag keeps the pair from arming the widget twice.
  document.addEventListener("DOMContentLoaded", bootstrap);
  if (document.readyState !== "loading") {
    bootstrap();
  }
})();

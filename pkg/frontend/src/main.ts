/** Entry point: reads ?api= and ?study= from the URL and mounts the app. */

import { ApiClient } from "./api.js";
import { AnnotationApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "";
const studyId = params.get("study") ?? "";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
if (!studyId) {
  root.textContent = "Add ?study=<study-id> (and optionally &api=<service base url>) to the URL.";
} else {
  const app = new AnnotationApp(root, new ApiClient(apiBase), { studyId });
  void app.start();
}

import { defineConfig } from "vite";

// the dev server proxies API and event traffic to a locally running
// engine: `mfwb serve --port 8040 --data-dir <dir with manifests>`
export default defineConfig({
  server: {
    proxy: {
      "/sessions": {
        target: "http://127.0.0.1:8040",
        ws: true,
      },
    },
  },
  test: {
    environment: "node",
  },
});

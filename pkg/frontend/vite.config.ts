import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    proxy: {
      "/runs": "http://127.0.0.1:8000",
      "/city": "http://127.0.0.1:8000",
      "/scenarios": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
    testTimeout: 120000,
    hookTimeout: 120000,
  },
});

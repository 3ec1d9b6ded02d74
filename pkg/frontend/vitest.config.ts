import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts"],
    // the smoke test boots the real backend, which needs a moment
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});

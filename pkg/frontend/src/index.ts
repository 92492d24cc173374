export * from "./types.js";
export * from "./sse.js";
export * from "./client.js";
export * from "./viewModel.js";
export * from "./interactions.js";
export * from "./render.js";
export * from "./console.js";

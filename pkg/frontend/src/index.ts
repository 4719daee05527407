export * from "./types.js";
export * from "./state.js";
export * from "./regex.js";
export * from "./conditions.js";
export * from "./constraints.js";
export * from "./widgets.js";
export * from "./tutorial.js";
export * from "./examflow.js";
export * from "./dashboard.js";
export * from "./api.js";

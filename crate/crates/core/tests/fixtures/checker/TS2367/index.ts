const mode: number = 1;
export const same = mode === "fast";

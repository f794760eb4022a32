export const items: Array = [];

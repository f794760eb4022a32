export function oddsBetween(start: number, end: number): number[];

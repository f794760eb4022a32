const list = { length: 3 };
export const n = list.lenght;

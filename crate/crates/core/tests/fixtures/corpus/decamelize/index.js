const handlePreserveConsecutiveUppercase = (decamelized, separator) => {
  return decamelized.replace(
    /([A-Z]+)([A-Z][a-z]+)/gu,
    (_, $1, $2) => $1 + separator + $2.toLowerCase(),
  );
};

export default function decamelize(str, sep) {
  return handlePreserveConsecutiveUppercase(str, sep);
}

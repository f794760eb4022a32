const isOdd = require('is-odd');

function oddsBetween(start, end) {
  const out = [];
  for (let n = start; n <= end; n++) {
    if (isOdd(n)) out.push(n);
  }
  return out;
}

module.exports.oddsBetween = oddsBetween;

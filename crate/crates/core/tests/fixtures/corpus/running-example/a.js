// a.js
var x = 2;    // private

module.exports.foo = 42;
module.exports.f = (i) => i+x;

'use strict';

module.exports = function unique(arr) {
  var len = arr.length;
  var o = {};
  var i;

  for (i = 0; i < len; i += 1) {
    o[arr[i]] = true;
  }

  var res = [];
  for (i in o) {
    res.push(i);
  }
  return res;
};

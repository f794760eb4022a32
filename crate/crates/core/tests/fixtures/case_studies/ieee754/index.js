export const write = function (buffer, value, offset, isLE, mLen, nBytes) {
  var eLen = (nBytes * 8) - mLen - 1;
  var i = isLE ? 0 : (nBytes - 1);
  var d = isLE ? 1 : -1;
  var s = value < 0 || (value === 0 && 1 / value < 0) ? 1 : 0;
  var e = Math.floor(Math.log(Math.abs(value)) / Math.LN2);
  var m = Math.abs(value) * Math.pow(2, mLen) - e;
  for (; mLen >= 8; buffer[offset + i] = m & 0xff, i += d, m /= 256, mLen -= 8) {}
  e = (e << mLen) | m;
  eLen += mLen;
  for (; eLen > 0; buffer[offset + i] = e & 0xff, i += d, e /= 256, eLen -= 8) {}
  buffer[offset + i - d] |= s * 128;
};

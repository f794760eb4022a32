var path = require('path');

module.exports.load = function (name) {
  return require(path.join(__dirname, 'plugins', name));
};

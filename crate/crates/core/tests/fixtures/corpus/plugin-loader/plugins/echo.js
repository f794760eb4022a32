module.exports.run = function (message) {
  return message;
};

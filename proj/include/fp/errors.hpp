#pragma once

#include <stdexcept>
#include <string>

namespace fp {

// Data errors raised by the library. Usage errors (bad arguments) use
// std::invalid_argument.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// No ridge survived extraction; the fragment is unusable.
class EmptyTemplate : public Error {
public:
  EmptyTemplate() : Error("no ridge survived extraction") {}
};

class MissingScore : public Error {
public:
  explicit MissingScore(const std::string &method)
      : Error("record has no score for method '" + method + "'") {}
};

class EmptySide : public Error {
public:
  explicit EmptySide(const std::string &side)
      : Error("no " + side + " scores to evaluate") {}
};

class CorpusShape : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace fp
